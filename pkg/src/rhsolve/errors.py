"""Exception types shared across the solver."""


class RHError(Exception):
    """Base class for all solver errors."""


class InvalidOrderError(RHError, ValueError):
    """Requested polynomial/collocation order is too small."""


class DegenerateScalingError(RHError, ValueError):
    """Scale factor alpha = 0 would collapse a contour group."""


class GeometryError(RHError, ValueError):
    """Inconsistent contour geometry (degenerate map, pole on the segment, ...)."""


class AmbiguousGeometryError(GeometryError):
    """Two distinct junctions closer than the resolvable tolerance."""


class NearSingularTargetError(RHError, ValueError):
    """Off-contour evaluation requested essentially on the contour."""


class AssemblyError(RHError, RuntimeError):
    """Collocation system could not be assembled (singular jump, bad geometry)."""


class SolveError(RHError, RuntimeError):
    """Linear solve failed or the system is numerically singular.

    Carries the condition estimate that triggered the failure, when known.
    """

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class TruncationError(RHError, RuntimeError):
    """Jump never decayed below the requested threshold within the search radius."""


class FactorizationError(RHError, ValueError):
    """LDU factorization is singular (1 - s1*s3 = 0)."""


class BranchCutError(RHError, ValueError):
    """Evaluation requested on a branch cut."""


class AnalyticityError(RHError, ValueError):
    """Deformed contour leaves the declared strip of analyticity."""


class SchemaError(RHError, ValueError):
    """Config file violates the experiment schema."""
