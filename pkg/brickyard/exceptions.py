"""
Custom exceptions for the brickyard platform.

Error philosophy:
  - Parse / authorization / quality-of-service errors → FAIL HARD: the operation
    stops before any side effect and the caller gets a stable machine code.
  - Model validation, data health, unmapped ingestion points and discovery
    ambiguity are REPORTED, not raised (see ValidationReport, HealthFinding,
    IngestReport, MeteringDiscovery.diagnostics).
  - The query document repair pass FIXES & CONTINUES on a closed set of known
    malformations and records a warning for each repair.

Every error carries an HTTP-style status so the service layer can render it
without a lookup table, and `to_response()` produces the ApiError body.
"""

from typing import Optional


class PlatformError(Exception):
    """Base exception for all brickyard errors."""

    code = "platform_error"
    status = 500

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_response(self) -> dict:
        """Convert to the ApiError body."""
        return {
            "error": {
                "code": self.code,
                "message": self.message,
                "detail": self.details,
            }
        }


# --- FAIL HARD: malformed input ---

class ParseError(PlatformError):
    """A model or ontology document could not be parsed."""

    code = "parse_error"
    status = 400

    def __init__(self, message: str, line: Optional[int] = None, details: Optional[dict] = None):
        details = dict(details or {})
        if line is not None:
            details["line"] = line
        super().__init__(message, details)
        self.line = line


class OntologyError(ParseError):
    """Ontology document is unusable (syntax error or subclass cycle)."""

    code = "ontology_invalid"


class QueryValidationError(PlatformError):
    """A BRIQL document failed decoding or validation."""

    code = "query_invalid"
    status = 400

    def __init__(self, message: str, reason: str, path: str = "$", details: Optional[dict] = None):
        details = dict(details or {})
        details.update({"reason": reason, "path": path})
        super().__init__(message, details)
        # Stable sub-code: malformed_json, dangling_reference, unknown_matcher, ...
        self.reason = reason
        self.path = path


class PayloadError(PlatformError):
    """An ingestion payload violates its schema."""

    code = "payload_invalid"
    status = 400

    def __init__(self, message: str, path: str = "$", details: Optional[dict] = None):
        details = dict(details or {})
        details["path"] = path
        super().__init__(message, details)
        self.path = path


class Nem12Error(PlatformError):
    """A NEM12 document violates the supported record grammar."""

    code = "nem12_invalid"
    status = 400

    def __init__(self, message: str, line: Optional[int] = None, details: Optional[dict] = None):
        details = dict(details or {})
        if line is not None:
            details["line"] = line
        super().__init__(message, details)
        self.line = line


class InvalidArgumentError(PlatformError):
    """An argument is outside its documented domain."""

    code = "invalid_argument"
    status = 400


class UnknownClassError(InvalidArgumentError):
    code = "unknown_class"


class UnknownRelationError(InvalidArgumentError):
    code = "unknown_relation"


class UnitMismatchError(InvalidArgumentError):
    code = "unit_mismatch"


# --- FAIL HARD: access ---

class AuthenticationError(PlatformError):
    """Missing or unknown bearer token."""

    code = "unauthenticated"
    status = 401


class AuthorizationError(PlatformError):
    """
    The principal lacks a covering grant.

    Unknown objects are reported exactly like forbidden ones so the error
    never reveals what exists.
    """

    code = "forbidden"
    status = 403

    def __init__(self, message: str, denied: Optional[list[str]] = None, details: Optional[dict] = None):
        details = dict(details or {})
        if denied is not None:
            details["denied"] = list(denied)
        super().__init__(message, details)
        self.denied = list(denied or [])


class SandboxViolation(PlatformError):
    """An application tried to reach something outside its capabilities."""

    code = "sandbox_violation"
    status = 403


# --- lookups and state conflicts ---

class NotFoundError(PlatformError):
    code = "not_found"
    status = 404


class DuplicateError(PlatformError):
    code = "duplicate"
    status = 409


class GraphPublishedError(PlatformError):
    """Write attempted against a frozen (published) graph."""

    code = "graph_published"
    status = 409


class RunInProgressError(PlatformError):
    code = "run_in_progress"
    status = 409


class ValidationFailedError(PlatformError):
    """Publish refused because the validation report carries errors."""

    code = "validation_failed"
    status = 422


class InsufficientDataError(PlatformError):
    code = "insufficient_data"
    status = 422


class DiscoveryError(PlatformError):
    code = "discovery_failed"
    status = 422


class NoUsablePointError(DiscoveryError):
    code = "no_usable_point"


# --- quality of service ---

class ResourceLimitError(PlatformError):
    """A query exceeded its binding or wall-time ceiling."""

    code = "resource_limit_exceeded"
    status = 429

    def __init__(self, message: str, limit: str, details: Optional[dict] = None):
        details = dict(details or {})
        details["limit"] = limit  # "bindings" or "time"
        super().__init__(message, details)
        self.limit = limit


class EntrypointError(PlatformError):
    """An application entrypoint raised or timed out."""

    code = "entrypoint_failed"
    status = 500


class ServiceStartError(PlatformError):
    code = "service_unavailable"
    status = 503
