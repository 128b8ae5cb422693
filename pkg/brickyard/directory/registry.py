"""
The directory: organisations, sites, buildings, model versions and grants.

Every public operation takes the acting principal first and checks access
before touching state. Mutations are serialized on one re-entrant lock and
persisted to the "registry" document; reads go through dict lookups that
never observe a half-applied change (the active-model swap is one
assignment).

Model ids: "<target>" names the target's active published model,
"<target>@<n>" names version n whatever its state.
"""

import threading
import uuid
from pathlib import Path
from typing import Callable, Iterable, Optional

from pydantic import ValidationError

from ..exceptions import (
    AuthorizationError,
    DuplicateError,
    InvalidArgumentError,
    NotFoundError,
    ValidationFailedError,
)
from ..graph.store import GraphStore, TripleLike
from ..logger import get_module_logger
from ..storage import JsonStore
from .models import (
    PLATFORM_SCOPE,
    ROLE_RANK,
    AccessDecision,
    Building,
    GeoLocation,
    ModelVersion,
    Organisation,
    RoleGrant,
    Site,
    ValidationReport,
)
from .rbac import decide, scope_chain
from .validation import run_rules

logger = get_module_logger("directory.registry")


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:8]}"


def graph_id_for(target: str, version: int) -> str:
    return f"urn:brickyard:graph:{target}:v{version}"


def _location(value) -> GeoLocation:
    try:
        return GeoLocation.model_validate(value)
    except ValidationError as e:
        raise InvalidArgumentError(f"Invalid geolocation: {e.errors(include_url=False)[0]['msg']}",
                                   details={"location": str(value)})


def split_model_id(model_id: str) -> tuple[str, Optional[int]]:
    """'bld-1@3' -> ('bld-1', 3); 'bld-1' -> ('bld-1', None)."""
    target, sep, version = str(model_id).partition("@")
    if not sep:
        return target, None
    try:
        number = int(version)
    except ValueError:
        raise InvalidArgumentError(f"Bad model id: {model_id}", details={"model_id": model_id})
    if number < 1:
        raise InvalidArgumentError(f"Bad model id: {model_id}", details={"model_id": model_id})
    return target, number


class Directory:
    """
    Multi-tenant registry and model lifecycle.

    Args:
        graphs: Graph store holding every model version's graph
        root: Optional directory for the persisted registry document
        stream_exists: Lookup used by the missing_stream validation rule
    """

    def __init__(self, graphs: GraphStore, root: Optional[Path] = None,
                 stream_exists: Optional[Callable[[str], bool]] = None):
        self.graphs = graphs
        self.stream_exists = stream_exists
        self._docs = JsonStore(root) if root else None
        self._lock = threading.RLock()

        self.orgs: dict[str, Organisation] = {}
        self.sites: dict[str, Site] = {}
        self.buildings: dict[str, Building] = {}
        self._versions: dict[str, list[ModelVersion]] = {}
        self._active: dict[str, int] = {}
        self._grants: dict[str, list[RoleGrant]] = {}

    # --- access control ---

    def parent_of(self, object_id: str) -> Optional[str]:
        if object_id in self.orgs:
            return PLATFORM_SCOPE
        if object_id in self.sites:
            return self.sites[object_id].org_id
        if object_id in self.buildings:
            return self.buildings[object_id].site_id
        return None

    def org_of(self, object_id: str) -> Optional[str]:
        chain = scope_chain(object_id, self.parent_of)
        return chain[-2] if len(chain) >= 2 else None

    def grants_of(self, principal: str) -> list[RoleGrant]:
        return list(self._grants.get(principal, []))

    def check_access(self, principal: str, object_id: str, role: str) -> AccessDecision:
        """Deny unless a grant at the object's scope or above meets `role`."""
        if role not in ROLE_RANK:
            raise InvalidArgumentError(f"Unknown role: {role}", details={"role": role})
        chain = scope_chain(object_id, self.parent_of)
        return decide(self._grants.get(principal, []), chain, role)

    def require(self, principal: str, object_ids: Iterable[str], role: str) -> None:
        """Raise AuthorizationError listing every object the principal may not act on."""
        denied = [o for o in object_ids if self.check_access(principal, o, role) is AccessDecision.DENY]
        if denied:
            logger.warning(f"Denied {role} for {principal} on {denied}")
            raise AuthorizationError(f"{role} access denied", denied=denied)

    def grant(self, principal: str, grantee: str, scope: str, role: str) -> RoleGrant:
        """Give `grantee` a role at `scope`; the caller must be admin there."""
        self.require(principal, [scope], "admin")
        return self.bootstrap_grant(grantee, scope, role)

    def bootstrap_grant(self, grantee: str, scope: str, role: str) -> RoleGrant:
        """Grant without an authorization check (start-up configuration only)."""
        new = RoleGrant(scope=scope, role=role)
        with self._lock:
            held = self._grants.setdefault(grantee, [])
            if new not in held:
                held.append(new)
                self._save()
        logger.info(f"Granted {role} on {scope} to {grantee}")
        return new

    # --- meta-objects ---

    def _check_unique(self, siblings: Iterable, name: str, parent: str) -> None:
        if any(o.name == name for o in siblings):
            raise DuplicateError(f"Name {name!r} already used in {parent}", details={"name": name, "parent": parent})

    def create_org(self, principal: str, name: str) -> Organisation:
        self.require(principal, [PLATFORM_SCOPE], "admin")
        with self._lock:
            self._check_unique(self.orgs.values(), name, PLATFORM_SCOPE)
            org = Organisation(org_id=new_id("org"), name=name)
            self.orgs[org.org_id] = org
            self._save()
        logger.info(f"Created organisation {org.org_id} ({name})")
        return org

    def create_site(self, principal: str, org_id: str, name: str, location: GeoLocation,
                    address: str = "", cadastral_ref: Optional[str] = None) -> Site:
        self.require(principal, [org_id], "admin")
        with self._lock:
            self._check_unique((s for s in self.sites.values() if s.org_id == org_id), name, org_id)
            site = Site(site_id=new_id("site"), org_id=org_id, name=name,
                        location=_location(location), address=address,
                        cadastral_ref=cadastral_ref)
            self.sites[site.site_id] = site
            self._save()
        logger.info(f"Created site {site.site_id} ({name}) in {org_id}")
        return site

    def create_building(self, principal: str, site_id: str, name: str) -> Building:
        self.require(principal, [site_id], "admin")
        with self._lock:
            self._check_unique((b for b in self.buildings.values() if b.site_id == site_id), name, site_id)
            building = Building(building_id=new_id("bld"), site_id=site_id, name=name)
            self.buildings[building.building_id] = building
            self._save()
        logger.info(f"Created building {building.building_id} ({name}) on {site_id}")
        return building

    def _readable(self, principal: str, object_id: str) -> bool:
        return self.check_access(principal, object_id, "reader") is AccessDecision.ALLOW

    def list_orgs(self, principal: str) -> list[Organisation]:
        return sorted((o for o in self.orgs.values() if self._readable(principal, o.org_id)),
                      key=lambda o: o.name)

    def list_sites(self, principal: str, org_id: str) -> list[Site]:
        return sorted((s for s in self.sites.values() if s.org_id == org_id and self._readable(principal, s.site_id)),
                      key=lambda s: s.name)

    def list_buildings(self, principal: str, site_id: str) -> list[Building]:
        return sorted((b for b in self.buildings.values()
                       if b.site_id == site_id and self._readable(principal, b.building_id)),
                      key=lambda b: b.name)

    def is_target(self, object_id: str) -> bool:
        return object_id in self.sites or object_id in self.buildings

    # --- model lifecycle ---

    def upload_draft(self, principal: str, target: str, document: str) -> ModelVersion:
        """
        Parse a model document into a new draft version of `target`.

        The document is parsed before a version number is taken, so a parse
        failure leaves no trace.

        Raises:
            AuthorizationError: caller is not modeler on target
            ParseError: document is malformed (line-numbered)
        """
        self.require(principal, [target], "modeler")
        if not self.is_target(target):
            raise AuthorizationError("modeler access denied", denied=[target])
        triples = self.graphs.parse_model_document(document)

        with self._lock:
            versions = self._versions.setdefault(target, [])
            number = len(versions) + 1
            graph_id = self.graphs.create_graph(graph_id_for(target, number))
            try:
                self.graphs.assert_triples(graph_id, triples)
            except Exception:
                self.graphs.drop_graph(graph_id)
                raise
            version = ModelVersion(target=target, version=number, graph_id=graph_id)
            versions.append(version)
            self._save()
        logger.info(f"Uploaded draft {version.model_id}: {len(triples)} triples")
        return version

    def edit_draft(self, principal: str, model_id: str, triples: Iterable[TripleLike]) -> int:
        """Assert triples into a draft; published versions raise GraphPublishedError."""
        target, _ = split_model_id(model_id)
        self.require(principal, [target], "modeler")
        version = self.resolve_model(model_id)
        return self.graphs.assert_triples(version.graph_id, triples)

    def model_versions(self, principal: str, target: str) -> list[ModelVersion]:
        self.require(principal, [target], "reader")
        return [v.model_copy() for v in self._versions.get(target, [])]

    def resolve_model(self, model_id: str) -> ModelVersion:
        """Look up a model id (no access check; callers check the target first)."""
        target, number = split_model_id(model_id)
        versions = self._versions.get(target, [])
        if number is None:
            number = self._active.get(target)
            if number is None:
                raise NotFoundError(f"No published model for {target}", details={"model_id": model_id})
        if not 1 <= number <= len(versions):
            raise NotFoundError(f"Model not found: {model_id}", details={"model_id": model_id})
        return versions[number - 1]

    def validate_model(self, principal: str, model_id: str) -> ValidationReport:
        target, _ = split_model_id(model_id)
        self.require(principal, [target], "reader")
        return self._validate(self.resolve_model(model_id))

    def _validate(self, version: ModelVersion) -> ValidationReport:
        findings = run_rules(self.graphs.snapshot(version.graph_id), self.graphs.ontology, self.stream_exists)
        report = ValidationReport(target=version.target, version=version.version, findings=findings)
        logger.info(f"Validated {version.model_id}: {report.error_count} errors, {report.warning_count} warnings")
        return report

    def publish_model(self, principal: str, model_id: str) -> ModelVersion:
        """
        Freeze a draft and make it the target's active model.

        Raises:
            ValidationFailedError: the validation report carries errors
        """
        target, _ = split_model_id(model_id)
        self.require(principal, [target], "modeler")
        with self._lock:
            version = self.resolve_model(model_id)
            if version.state == "published":
                return version.model_copy()
            report = self._validate(version)
            if not report.ok:
                raise ValidationFailedError(
                    f"{version.model_id} has {report.error_count} validation errors",
                    details={"findings": [f.model_dump() for f in report.findings if f.severity == "error"]},
                )
            self.graphs.freeze(version.graph_id)
            version.state = "published"
            previous = self._active.get(target)
            if previous is not None:
                self._versions[target][previous - 1].active = False
            version.active = True
            self._active[target] = version.version
            self._save()
        logger.info(f"Published {version.model_id} (previous active: {previous})")
        return version.model_copy()

    # --- persistence ---

    def _save(self) -> None:
        if self._docs is None:
            return
        self._docs.put("registry", {
            "orgs": {k: v.model_dump(mode="json") for k, v in self.orgs.items()},
            "sites": {k: v.model_dump(mode="json") for k, v in self.sites.items()},
            "buildings": {k: v.model_dump(mode="json") for k, v in self.buildings.items()},
            "versions": {k: [v.model_dump(mode="json") for v in vs] for k, vs in self._versions.items()},
            "grants": {k: [g.model_dump() for g in gs] for k, gs in self._grants.items()},
        })

    def restore(self) -> None:
        """Reload the registry document written by earlier mutations."""
        if self._docs is None:
            return
        doc = self._docs.get("registry")
        if not doc:
            return
        with self._lock:
            self.orgs = {k: Organisation(**v) for k, v in doc.get("orgs", {}).items()}
            self.sites = {k: Site(**v) for k, v in doc.get("sites", {}).items()}
            self.buildings = {k: Building(**v) for k, v in doc.get("buildings", {}).items()}
            self._versions = {k: [ModelVersion(**v) for v in vs] for k, vs in doc.get("versions", {}).items()}
            self._active = {t: v.version for t, vs in self._versions.items() for v in vs if v.active}
            self._grants = {k: [RoleGrant(**g) for g in gs] for k, gs in doc.get("grants", {}).items()}
        logger.info(f"Restored registry: {len(self.orgs)} orgs, {len(self.sites)} sites, "
                    f"{len(self.buildings)} buildings")
