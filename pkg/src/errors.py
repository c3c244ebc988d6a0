"""Error types raised by the geometry kernel, the mesh and the campaign driver"""

from typing import Any, Optional, Sequence


class GrassfieldError(Exception):
    """Base class for all engine errors"""


class AmbientMismatch(GrassfieldError):
    """Subspaces live in ambient spaces of different dimension"""


class NonOrthonormal(GrassfieldError):
    """A basis does not have orthonormal columns"""


class RankMismatch(GrassfieldError):
    """An equal-rank operation received subspaces of different rank"""


class SingularProduct(GrassfieldError):
    """originᵀ·target is numerically singular (a principal angle reaches π/2)"""

    def __init__(self, message: str, vertex_index: Optional[int] = None):
        super().__init__(message)
        self.vertex_index = vertex_index


class TangencyViolation(GrassfieldError):
    """A tangent matrix is not orthogonal to its origin"""


class DomainError(GrassfieldError):
    """An argument lies outside its admissible range"""


class DegenerateField(GrassfieldError):
    """The response matrix is identically zero"""


class InsufficientRank(GrassfieldError):
    """Fewer singular values than the global rank survive tolerance screening"""


class DimensionUnsupported(GrassfieldError):
    """Stochastic dimension outside the supported range"""


class OutsideSimplex(GrassfieldError):
    """A point lies outside the simplex (or outside every simplex of a mesh)"""


class DuplicatePoint(GrassfieldError):
    """A point coincides with an existing mesh vertex"""


class NonPositiveSingular(GrassfieldError):
    """Interpolated singular values are not strictly positive"""


class NothingToRefine(GrassfieldError):
    """Every element is flagged converged"""


class BudgetExhausted(GrassfieldError):
    """The evaluation budget ran out; `partial` holds whatever was computed"""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class ModelEvaluationError(GrassfieldError):
    """A model evaluation failed at parameter point `xi`"""

    def __init__(self, message: str, xi: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.xi = None if xi is None else [float(x) for x in xi]


class ExchangeTimeout(ModelEvaluationError):
    """No response file appeared before the exchange timeout"""


class MalformedSnapshot(GrassfieldError):
    """A snapshot file could not be parsed"""


class ConfigError(GrassfieldError):
    """Invalid run configuration; `key` names the offending entry"""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
