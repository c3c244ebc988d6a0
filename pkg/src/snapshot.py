"""Full-field snapshots and their rank-truncated SVD factors"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.errors import DegenerateField, DomainError, InsufficientRank, NonPositiveSingular
from src.grassmann import SubspacePoint, thin_svd

MACHINE_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True, eq=False)
class FieldSnapshot:
    """Response matrix F (n_f × m_f) at parameter point ξ"""

    field: np.ndarray
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        matrix = np.array(self.field, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise DomainError(f"Field must be a non-empty matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise DomainError("Field contains non-finite entries")
        params = np.array(self.params, dtype=np.float64).ravel()
        matrix.setflags(write=False)
        params.setflags(write=False)
        object.__setattr__(self, "field", matrix)
        object.__setattr__(self, "params", params)

    @property
    def shape(self):
        return self.field.shape


@dataclass(frozen=True)
class RankPolicy:
    """
    How many singular triplets each snapshot keeps.

    - global rank: exactly `global_rank` triplets for every snapshot
    - tolerance: σ > max(Σ)·n_f·scale (scale defaults to machine epsilon)
    - absolute: σ > absolute_tol, a user-prescribed level
    """

    global_rank: Optional[int] = None
    scale: float = MACHINE_EPS
    absolute_tol: Optional[float] = None

    def __post_init__(self):
        if self.global_rank is not None and self.global_rank < 1:
            raise DomainError(f"Global rank must be >= 1, got {self.global_rank}")
        if self.scale <= 0:
            raise DomainError(f"Tolerance scale must be positive, got {self.scale}")
        if self.absolute_tol is not None and self.absolute_tol <= 0:
            raise DomainError(f"Absolute tolerance must be positive, got {self.absolute_tol}")

    @classmethod
    def global_(cls, rank: int) -> "RankPolicy":
        return cls(global_rank=int(rank))

    @classmethod
    def tolerance(cls, scale: float = MACHINE_EPS) -> "RankPolicy":
        return cls(scale=float(scale))

    @classmethod
    def absolute(cls, tol: float) -> "RankPolicy":
        return cls(absolute_tol=float(tol))

    @classmethod
    def parse(cls, text: str) -> "RankPolicy":
        """Parse `tolerance`, `tolerance:<scale>`, `absolute:<tol>` or `global:<r>`"""
        kind, _, argument = str(text).strip().lower().partition(":")
        try:
            if kind == "global":
                return cls.global_(int(argument))
            if kind == "tolerance":
                return cls.tolerance(float(argument)) if argument else cls.tolerance()
            if kind == "absolute":
                return cls.absolute(float(argument))
        except ValueError:
            pass
        raise DomainError(f"Cannot parse rank policy '{text}'")

    @property
    def is_global(self) -> bool:
        return self.global_rank is not None

    def threshold(self, singular_values: np.ndarray, n_f: int) -> float:
        """Screening tolerance for a snapshot with these singular values"""
        if self.absolute_tol is not None:
            return self.absolute_tol
        return float(np.max(singular_values)) * n_f * self.scale

    def describe(self) -> str:
        if self.is_global:
            return f"global:{self.global_rank}"
        if self.absolute_tol is not None:
            return f"absolute:{self.absolute_tol!r}"
        return "tolerance" if self.scale == MACHINE_EPS else f"tolerance:{self.scale!r}"


@dataclass(frozen=True, eq=False)
class SnapshotDecomposition:
    """Truncated thin SVD F ≈ Ψ·Σ·Φᵀ"""

    left: SubspacePoint
    singular_values: np.ndarray
    right: SubspacePoint

    def __post_init__(self):
        values = np.array(self.singular_values, dtype=np.float64).ravel()
        if values.size != self.left.rank or values.size != self.right.rank:
            raise DomainError(
                f"Rank mismatch: {values.size} singular values, "
                f"left rank {self.left.rank}, right rank {self.right.rank}"
            )
        if np.any(values <= 0):
            raise NonPositiveSingular(f"Singular values must be positive, got min {values.min():.3e}")
        if np.any(np.diff(values) > 1e-12 * values[0]):
            raise DomainError("Singular values must be nonincreasing")
        values.setflags(write=False)
        object.__setattr__(self, "singular_values", values)

    @property
    def rank(self) -> int:
        return self.singular_values.size

    @property
    def shape(self):
        return self.left.ambient_dim, self.right.ambient_dim

    def truncate(self, rank: int) -> "SnapshotDecomposition":
        """Keep the leading `rank` triplets"""
        if rank == self.rank:
            return self
        return SnapshotDecomposition(
            self.left.truncate(rank), self.singular_values[:rank], self.right.truncate(rank)
        )


def reshape_field(values: Sequence[float], n_f: int, m_f: int) -> np.ndarray:
    """Row-major reshape of a flat response vector into an n_f × m_f matrix"""
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size != n_f * m_f:
        raise DomainError(f"Cannot reshape {flat.size} values into {n_f}x{m_f}")
    return flat.reshape((n_f, m_f), order="C")


def decompose(snapshot: FieldSnapshot, policy: RankPolicy) -> SnapshotDecomposition:
    """
    Thin SVD of the snapshot field truncated by the rank policy.

    Raises:
        DegenerateField: the field is identically zero
        InsufficientRank: global rank exceeds the number of screened singular values
    """
    matrix = snapshot.field
    u, s, vt = thin_svd(matrix)
    if s.size == 0 or s[0] <= 0.0:
        raise DegenerateField("Field is the zero matrix")
    tol = policy.threshold(s, matrix.shape[0])
    significant = int(np.count_nonzero(s > tol))
    if policy.is_global:
        rank = policy.global_rank
        if significant < rank:
            raise InsufficientRank(
                f"Only {significant} singular values exceed tol={tol:.3e}; global rank is {rank}"
            )
    else:
        rank = max(significant, 1)
    return SnapshotDecomposition(
        SubspacePoint(u[:, :rank]), s[:rank], SubspacePoint(vt[:rank].T)
    )


def reconstruct(dec: SnapshotDecomposition) -> np.ndarray:
    """Ψ·diag(Σ)·Φᵀ"""
    return (dec.left.basis * dec.singular_values) @ dec.right.basis.T
