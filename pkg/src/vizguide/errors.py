"""Exception types shared across the package."""


class VizguideError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------------------
# Dashboard ingestion
# ---------------------------------------------------------------------------


class SchemaError(VizguideError):
    """A spec document field is missing or has the wrong type.

    Carries the JSON-ish path of the offending field, e.g.
    ``visuals[2].bounds.w``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class DanglingRefError(VizguideError):
    """A field reference or cross-filter target does not resolve."""


class GeometryError(VizguideError):
    """Bounds fall outside the page, are non-positive, or leave no room."""


# ---------------------------------------------------------------------------
# Region resolution
# ---------------------------------------------------------------------------


class DegenerateGeometry(VizguideError):
    """Input collapses to zero area even after normalization."""


class NoHit(VizguideError):
    """A lasso or point touches no visual (selection on empty canvas)."""


# ---------------------------------------------------------------------------
# Highlighting
# ---------------------------------------------------------------------------


class UnknownAnchor(VizguideError):
    """Anchor id names a missing visual or a part invalid for its kind."""


class OverlappingSpans(VizguideError):
    """Anchor spans passed to the markup renderer overlap."""


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------


class UnknownVisual(VizguideError):
    """A region hit references a visual outside the session's dashboard."""


class UnknownSession(VizguideError):
    """Session id is not registered."""


class UnknownDashboard(VizguideError):
    """Dashboard id is not registered."""


# ---------------------------------------------------------------------------
# Provider gateway
# ---------------------------------------------------------------------------


class GatewayError(VizguideError):
    """Base class for provider-call failures."""


class GatewayTimeout(GatewayError):
    """The provider did not answer within the configured timeout."""


class GatewayRefused(GatewayError):
    """The provider answered with a non-2xx status."""


class TokenExpired(VizguideError):
    """Voice token presented after its TTL."""


class TokenUnknown(VizguideError):
    """Voice token was never minted."""


class TokenReused(VizguideError):
    """Voice token was already redeemed once."""
