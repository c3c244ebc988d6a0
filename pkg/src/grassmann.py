"""Subspace geometry on Grassmann manifolds

Points of G(r, n) are stored as n×r orthonormal bases (any representative of the
equivalence class). The module provides principal angles, distances between
equal-rank subspaces and between subspaces of different rank (the doubly
infinite Grassmannian), the logarithmic and exponential maps, and geodesics.
Every function is pure; inputs are never mutated.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from src.config import ORTHONORMAL_TOL, SINGULAR_TOL, TANGENT_TOL
from src.errors import (
    AmbientMismatch,
    DomainError,
    NonOrthonormal,
    RankMismatch,
    SingularProduct,
    TangencyViolation,
)

HALF_PI = math.pi / 2


class MetricKind(str, Enum):
    """Distance families expressed through principal angles"""

    GRASSMANN = "grassmann"
    CHORDAL = "chordal"
    PROCRUSTES = "procrustes"

    @classmethod
    def parse(cls, value: Union[str, "MetricKind"]) -> "MetricKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            choices = ", ".join(kind.value for kind in cls)
            raise DomainError(f"Unknown metric '{value}' (expected one of: {choices})")


def thin_svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Thin SVD with a deterministic sign convention.

    The largest-magnitude entry of each left singular vector is made nonnegative
    and the matching right singular vector is flipped with it, so factors are
    reproducible across runs and LAPACK builds.

    Returns:
        (U, s, Vᵀ) with U of shape (n, k), s of length k, Vᵀ of shape (k, m)
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    try:
        u, s, vt = linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except linalg.LinAlgError:
        u, s, vt = linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")
    if u.size:
        columns = np.arange(u.shape[1])
        pivots = np.argmax(np.abs(u), axis=0)
        signs = np.sign(u[pivots, columns])
        signs[signs == 0] = 1.0
        u = u * signs
        vt = vt * signs[:, None]
    return u, s, vt


def orthonormalize(matrix: np.ndarray) -> np.ndarray:
    """Economic QR with a positive R diagonal (keeps nearly orthonormal input nearly unchanged)"""
    q, r = linalg.qr(np.asarray(matrix, dtype=np.float64), mode="economic")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True, eq=False)
class SubspacePoint:
    """A point on G(r, n) represented by an n×r basis with orthonormal columns"""

    basis: np.ndarray
    tol: float = field(default=ORTHONORMAL_TOL, repr=False)

    def __post_init__(self):
        basis = np.array(self.basis, dtype=np.float64)
        if basis.ndim != 2:
            raise DomainError(f"Basis must be a 2-D matrix, got shape {basis.shape}")
        n, r = basis.shape
        if r < 1 or r > n:
            raise DomainError(f"Rank must satisfy 1 <= r <= n, got r={r}, n={n}")
        if not np.all(np.isfinite(basis)):
            raise NonOrthonormal("Basis contains non-finite entries")
        deviation = np.max(np.abs(basis.T @ basis - np.eye(r)))
        if deviation > self.tol:
            raise NonOrthonormal(
                f"Columns are not orthonormal: max |BᵀB - I| = {deviation:.3e} > {self.tol:.1e}"
            )
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "SubspacePoint":
        """Span of the columns of a full-column-rank matrix"""
        return cls(orthonormalize(matrix))

    @classmethod
    def random(cls, ambient_dim: int, rank: int, rng: np.random.Generator) -> "SubspacePoint":
        """Uniformly distributed point on G(rank, ambient_dim)"""
        return cls.from_matrix(rng.standard_normal((ambient_dim, rank)))

    def truncate(self, rank: int) -> "SubspacePoint":
        """Subspace spanned by the leading `rank` columns"""
        if not 1 <= rank <= self.rank:
            raise DomainError(f"Cannot truncate rank-{self.rank} basis to rank {rank}")
        return SubspacePoint(self.basis[:, :rank], tol=self.tol)


@dataclass(frozen=True, eq=False)
class PrincipalAngleSet:
    """Principal angles in radians, stored in nondecreasing order"""

    angles: np.ndarray

    def __post_init__(self):
        angles = np.sort(np.asarray(self.angles, dtype=np.float64).ravel())
        if angles.size and (angles[0] < 0.0 or angles[-1] > HALF_PI):
            raise DomainError("Principal angles must lie in [0, pi/2]")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    def __len__(self) -> int:
        return self.angles.size

    @property
    def largest(self) -> float:
        return float(self.angles[-1]) if self.angles.size else 0.0


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A matrix Γ in the tangent space at `origin` (originᵀ·Γ = 0)"""

    matrix: np.ndarray
    origin: SubspacePoint
    tol: float = field(default=TANGENT_TOL, repr=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.shape != self.origin.basis.shape:
            raise DomainError(
                f"Tangent shape {matrix.shape} does not match origin shape {self.origin.basis.shape}"
            )
        _check_tangency(self.origin, matrix, self.tol)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def zero(cls, origin: SubspacePoint) -> "TangentVector":
        return cls(np.zeros_like(origin.basis), origin)

    @classmethod
    def combine(cls, tangents: Sequence["TangentVector"], weights: Sequence[float]) -> "TangentVector":
        """Weighted sum Σ wᵢ Γᵢ of tangents sharing one origin"""
        if len(tangents) != len(weights) or not tangents:
            raise DomainError("Need one weight per tangent vector")
        origin = tangents[0].origin
        total = np.zeros_like(origin.basis)
        for tangent, weight in zip(tangents, weights):
            if tangent.origin is not origin and not np.array_equal(tangent.origin.basis, origin.basis):
                raise DomainError("Tangent vectors live at different origins")
            total = total + float(weight) * tangent.matrix
        return cls(total, origin)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


PointLike = Union[SubspacePoint, np.ndarray]


def _as_point(value: PointLike) -> SubspacePoint:
    return value if isinstance(value, SubspacePoint) else SubspacePoint(value)


def _check_ambient(a: SubspacePoint, b: SubspacePoint):
    if a.ambient_dim != b.ambient_dim:
        raise AmbientMismatch(f"Ambient dimensions differ: {a.ambient_dim} vs {b.ambient_dim}")


def _check_tangency(origin: SubspacePoint, matrix: np.ndarray, tol: float):
    violation = np.max(np.abs(origin.basis.T @ matrix)) if matrix.size else 0.0
    if violation > tol:
        raise TangencyViolation(f"max |originᵀ·Γ| = {violation:.3e} exceeds {tol:.1e}")


def principal_angles(a: PointLike, b: PointLike) -> PrincipalAngleSet:
    """
    Principal angles between two subspaces of the same ambient space.

    Cosines come from the singular values of aᵀb (clamped to [0, 1]); angles
    whose cosine exceeds 1/√2 are recomputed from the sines of the residual of
    the lower-rank basis after projection onto the other, which keeps small
    angles accurate to machine precision.

    Returns:
        min(r_a, r_b) angles in nondecreasing order
    """
    a, b = _as_point(a), _as_point(b)
    _check_ambient(a, b)
    small, large = (a, b) if a.rank <= b.rank else (b, a)
    cross = small.basis.T @ large.basis
    cosines = np.clip(linalg.svdvals(cross), 0.0, 1.0)
    residual = small.basis - large.basis @ (large.basis.T @ small.basis)
    sines = np.clip(linalg.svdvals(residual), 0.0, 1.0)[::-1]
    angles = np.where(cosines ** 2 >= 0.5, np.arcsin(sines), np.arccos(cosines))
    return PrincipalAngleSet(angles)


def _metric_value(
    kind: MetricKind, angles: np.ndarray, missing: int, scaled_procrustes: bool
) -> float:
    if kind is MetricKind.GRASSMANN:
        return math.sqrt(missing * HALF_PI ** 2 + float(np.sum(angles ** 2)))
    if kind is MetricKind.CHORDAL:
        return math.sqrt(missing + float(np.sum(np.sin(angles) ** 2)))
    value = math.sqrt(missing + float(np.sum(np.sin(angles / 2.0) ** 2)))
    return 2.0 * value if scaled_procrustes else value


def distance_equidim(
    kind: Union[MetricKind, str], a: PointLike, b: PointLike, scaled_procrustes: bool = False
) -> float:
    """
    Distance between subspaces of equal rank.

    Grassmann (Σθ²)^½, Chordal (Σ sin²θ)^½, Procrustes (Σ sin²(θ/2))^½; with
    `scaled_procrustes` the Procrustes value carries the leading factor 2 of the
    equal-rank matrix form ‖aU − bV‖_F.
    """
    kind = MetricKind.parse(kind)
    a, b = _as_point(a), _as_point(b)
    if a.rank != b.rank:
        raise RankMismatch(f"Ranks differ ({a.rank} vs {b.rank}); use distance_infinite")
    angles = principal_angles(a, b).angles
    return _metric_value(kind, angles, 0, scaled_procrustes)


def distance_infinite(
    kind: Union[MetricKind, str], a: PointLike, b: PointLike, scaled_procrustes: bool = False
) -> float:
    """
    Distance on the doubly infinite Grassmannian; ranks may differ.

    With k = min(r_a, r_b) principal angles and Δ = |r_a − r_b|:
    Grassmann (Δπ²/4 + Σθ²)^½, Chordal (Δ + Σ sin²θ)^½,
    Procrustes (Δ + Σ sin²(θ/2))^½ (times 2 with `scaled_procrustes`).
    Reduces to distance_equidim when the ranks agree.
    """
    kind = MetricKind.parse(kind)
    a, b = _as_point(a), _as_point(b)
    angles = principal_angles(a, b).angles
    return _metric_value(kind, angles, abs(a.rank - b.rank), scaled_procrustes)


def schubert_distance(
    kind: Union[MetricKind, str], a: PointLike, b: PointLike, scaled_procrustes: bool = False
) -> float:
    """
    Point-to-set distance from the lower-rank subspace to the closest subspace of
    the same rank contained in the other one (no padding for the rank gap).
    """
    kind = MetricKind.parse(kind)
    angles = principal_angles(a, b).angles
    return _metric_value(kind, angles, 0, scaled_procrustes)


def chordal_projection_distance(a: PointLike, b: PointLike) -> float:
    """‖aaᵀ − bbᵀ‖_F / √2 for equal-rank subspaces"""
    a, b = _as_point(a), _as_point(b)
    _check_ambient(a, b)
    if a.rank != b.rank:
        raise RankMismatch(f"Ranks differ ({a.rank} vs {b.rank})")
    difference = a.basis @ a.basis.T - b.basis @ b.basis.T
    return float(np.linalg.norm(difference) / math.sqrt(2.0))


def procrustes_frame_distance(a: PointLike, b: PointLike) -> float:
    """‖aU − bV‖_F where aᵀb = U·S·Vᵀ (factor-2 Procrustes convention)"""
    a, b = _as_point(a), _as_point(b)
    _check_ambient(a, b)
    if a.rank != b.rank:
        raise RankMismatch(f"Ranks differ ({a.rank} vs {b.rank})")
    u, _, vt = linalg.svd(a.basis.T @ b.basis)
    return float(np.linalg.norm(a.basis @ u - b.basis @ vt.T))


def _log_factors(
    origin: SubspacePoint, target: SubspacePoint, singular_tol: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    _check_ambient(origin, target)
    if origin.rank != target.rank:
        raise RankMismatch(f"Ranks differ ({origin.rank} vs {target.rank})")
    product = origin.basis.T @ target.basis
    smallest = float(linalg.svdvals(product).min())
    if smallest < singular_tol:
        raise SingularProduct(
            f"originᵀ·target is singular (smallest singular value {smallest:.3e}); "
            "subspaces are too far apart for a common chart"
        )
    residual = target.basis - origin.basis @ product
    m = linalg.solve(product.T, residual.T).T
    u, s, vt = thin_svd(m)
    return u, np.arctan(s), vt


def _exp_from_factors(
    origin_basis: np.ndarray, u: np.ndarray, theta: np.ndarray, vt: np.ndarray
) -> np.ndarray:
    moved = (origin_basis @ vt.T) * np.cos(theta) + u * np.sin(theta)
    return orthonormalize(moved @ vt)


def log_map(origin: PointLike, target: PointLike, singular_tol: float = SINGULAR_TOL) -> TangentVector:
    """
    Lift `target` to the tangent space at `origin`.

    M = (target − origin·originᵀ·target)·(originᵀ·target)⁻¹ = U·S·Vᵀ and
    Γ = U·arctan(S)·Vᵀ. Raises SingularProduct when originᵀ·target is
    numerically singular.
    """
    origin, target = _as_point(origin), _as_point(target)
    u, theta, vt = _log_factors(origin, target, singular_tol)
    return TangentVector((u * theta) @ vt, origin)


def exp_map(origin: PointLike, gamma: TangentVector) -> SubspacePoint:
    """
    Map a tangent vector at `origin` back to the manifold.

    Γ = U·S·Vᵀ gives span[(origin·V·cos S + U·sin S)·Vᵀ], re-orthonormalized.
    """
    origin = _as_point(origin)
    matrix = gamma.matrix
    if matrix.shape != origin.basis.shape:
        raise TangencyViolation(
            f"Tangent shape {matrix.shape} does not match origin shape {origin.basis.shape}"
        )
    _check_tangency(origin, matrix, gamma.tol)
    u, s, vt = thin_svd(matrix)
    return SubspacePoint(_exp_from_factors(origin.basis, u, s, vt))


def geodesic(a: PointLike, b: PointLike, z: float, singular_tol: float = SINGULAR_TOL) -> SubspacePoint:
    """Point at parameter z ∈ [0, 1] on the geodesic from `a` (z=0) to `b` (z=1)"""
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"Geodesic parameter must lie in [0, 1], got {z}")
    a, b = _as_point(a), _as_point(b)
    u, theta, vt = _log_factors(a, b, singular_tol)
    return SubspacePoint(_exp_from_factors(a.basis, u, z * theta, vt))
