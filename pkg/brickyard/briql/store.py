"""
Stored queries: versioned, immutable, canonical BRIQL bodies.

Each query id maps to one JSON document holding its owner organisation and
the canonical text of every version; version n is entry n-1. Bodies are
validated before a version number is assigned, so a rejected body never
consumes one.
"""

import re
import threading
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel

from ..exceptions import DuplicateError, InvalidArgumentError, NotFoundError
from ..logger import get_module_logger
from ..storage import JsonStore
from .parser import canonical_json, parse_query
from .schemas import BriqlQuery

logger = get_module_logger("briql.store")

QUERY_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$")


class StoredQuery(BaseModel):
    query_id: str
    version: int
    owner: str
    canonical: str          # canonical JSON text of the body

    @property
    def body(self) -> BriqlQuery:
        return parse_query(self.canonical)


class QueryStore:
    """File-backed store of query versions."""

    def __init__(self, root: Optional[Path] = None):
        self._docs = JsonStore(root) if root else None
        self._memory: dict[str, dict] = {}
        self._lock = threading.Lock()

    def _load(self, query_id: str) -> Optional[dict]:
        if query_id in self._memory:
            return self._memory[query_id]
        if self._docs is not None:
            doc = self._docs.get(query_id)
            if doc is not None:
                self._memory[query_id] = doc
            return doc
        return None

    def store_query(self, body: Union[str, dict, BriqlQuery], query_id: str, owner: str) -> tuple[str, int]:
        """
        Validate and store a new version.

        Returns:
            (query_id, version); versions start at 1 per query id
        """
        if not QUERY_ID.match(query_id or ""):
            raise InvalidArgumentError(f"Invalid query id: {query_id!r}", details={"query_id": query_id})
        canonical = canonical_json(parse_query(body))

        with self._lock:
            doc = self._load(query_id) or {"owner": owner, "versions": []}
            if doc["owner"] != owner:
                raise DuplicateError(
                    f"Query id {query_id} is taken by another organisation", details={"query_id": query_id}
                )
            doc["versions"].append(canonical)
            self._memory[query_id] = doc
            if self._docs is not None:
                self._docs.put(query_id, doc)
            version = len(doc["versions"])

        logger.info(f"Stored query {query_id} v{version}")
        return query_id, version

    def get_query(self, query_id: str, version: Optional[int] = None) -> StoredQuery:
        """A stored version (latest when version is None)."""
        doc = self._load(query_id)
        if not doc or not doc["versions"]:
            raise NotFoundError(f"Stored query not found: {query_id}", details={"query_id": query_id})
        if version is None:
            version = len(doc["versions"])
        if not 1 <= version <= len(doc["versions"]):
            raise NotFoundError(
                f"Stored query {query_id} has no version {version}",
                details={"query_id": query_id, "version": version},
            )
        return StoredQuery(query_id=query_id, version=version, owner=doc["owner"],
                           canonical=doc["versions"][version - 1])

    def list_versions(self, query_id: str) -> list[int]:
        doc = self._load(query_id)
        if not doc:
            raise NotFoundError(f"Stored query not found: {query_id}", details={"query_id": query_id})
        return list(range(1, len(doc["versions"]) + 1))
