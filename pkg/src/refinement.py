"""Refinement primitives: element scores, selection, vertex errors and convergence"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set, Tuple, Union

import numpy as np

from src.config import (
    DEFAULT_ALPHA,
    DEFAULT_BUDGET,
    DEFAULT_MAX_LEVELS,
    DEFAULT_SEED,
    DEFAULT_THETA_REF,
    MAX_STOCHASTIC_DIM,
    ZERO_SCORE_TOL,
)
from src.errors import ConfigError, DomainError, NothingToRefine
from src.grassmann import MetricKind, SubspacePoint, distance_equidim, distance_infinite
from src.interpolation import MODES
from src.mesh import SimplexMesh
from src.snapshot import RankPolicy, SnapshotDecomposition


@dataclass
class CampaignConfig:
    """Settings of one adaptive campaign"""

    n_d: int = 2
    metric: MetricKind = MetricKind.GRASSMANN
    rank_policy: RankPolicy = field(default_factory=RankPolicy.tolerance)
    alpha: float = DEFAULT_ALPHA
    theta_ref: float = DEFAULT_THETA_REF
    max_levels: int = DEFAULT_MAX_LEVELS
    seed: int = DEFAULT_SEED
    budget: int = DEFAULT_BUDGET
    scaled_procrustes: bool = False
    interpolation_mode: str = "aligned"
    jobs: int = 1

    def validate(self) -> "CampaignConfig":
        """Raise ConfigError naming the first invalid field"""
        if not isinstance(self.n_d, int) or not 1 <= self.n_d <= MAX_STOCHASTIC_DIM:
            raise ConfigError(f"must be an integer in 1..{MAX_STOCHASTIC_DIM}, got {self.n_d!r}", key="n_d")
        try:
            self.metric = MetricKind.parse(self.metric)
        except DomainError as e:
            raise ConfigError(str(e), key="metric")
        if not isinstance(self.rank_policy, RankPolicy):
            raise ConfigError(f"expected a rank policy, got {self.rank_policy!r}", key="rank_policy")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"must satisfy 0 < alpha < 1, got {self.alpha!r}", key="alpha")
        if not 0.0 <= self.theta_ref <= math.pi / 2:
            raise ConfigError(f"must lie in [0, pi/2], got {self.theta_ref!r}", key="theta_ref")
        if not isinstance(self.max_levels, int) or self.max_levels < 1:
            raise ConfigError(f"must be a positive integer, got {self.max_levels!r}", key="max_levels")
        if not isinstance(self.budget, int) or self.budget < 2 ** self.n_d + 1:
            raise ConfigError(
                f"must cover at least the initial design ({2 ** self.n_d + 1} evaluations), got {self.budget!r}",
                key="budget",
            )
        if not isinstance(self.seed, int):
            raise ConfigError(f"must be an integer, got {self.seed!r}", key="seed")
        if self.interpolation_mode not in MODES:
            raise ConfigError(f"must be one of {', '.join(MODES)}", key="interpolation_mode")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"must be a positive integer, got {self.jobs!r}", key="jobs")
        return self

    def to_dict(self) -> Dict:
        return {
            "n_d": self.n_d,
            "metric": MetricKind.parse(self.metric).value,
            "rank_policy": self.rank_policy.describe(),
            "alpha": self.alpha,
            "theta_ref": self.theta_ref,
            "max_levels": self.max_levels,
            "seed": self.seed,
            "budget": self.budget,
            "scaled_procrustes": self.scaled_procrustes,
            "interpolation_mode": self.interpolation_mode,
            "jobs": self.jobs,
        }


@dataclass(frozen=True)
class ElementScore:
    """Sum D_k of the pairwise subspace distances over an element's vertices"""

    simplex_id: int
    pairwise: Tuple[Tuple[int, int, float], ...]
    total: float


@dataclass(frozen=True)
class VertexErrorRecord:
    """Average principal angle θ̃ measured at a sample when it was added"""

    point_id: int
    theta: float
    level: int

    def __post_init__(self):
        if not self.theta >= 0.0:
            raise DomainError(f"Vertex error must be nonnegative, got {self.theta}")


def subspace_distance(
    metric: Union[MetricKind, str],
    a: SubspacePoint,
    b: SubspacePoint,
    policy: RankPolicy,
    scaled_procrustes: bool = False,
) -> float:
    """δ: equal-rank distance under a global rank, doubly infinite distance otherwise"""
    if policy.is_global:
        return distance_equidim(metric, a, b, scaled_procrustes=scaled_procrustes)
    return distance_infinite(metric, a, b, scaled_procrustes=scaled_procrustes)


def score_from_pairwise(pairwise: Iterable[Tuple[int, int, float]], simplex_id: int = -1) -> ElementScore:
    pairwise = tuple((int(i), int(j), float(d)) for i, j, d in pairwise)
    return ElementScore(simplex_id, pairwise, float(sum(d for _, _, d in pairwise)))


def element_score(
    decomps: Sequence[SnapshotDecomposition],
    metric: Union[MetricKind, str],
    policy: RankPolicy,
    simplex_id: int = -1,
    scaled_procrustes: bool = False,
) -> ElementScore:
    """Left-factor distances summed once per unordered vertex pair"""
    pairwise = []
    for i in range(len(decomps)):
        for j in range(i + 1, len(decomps)):
            d = subspace_distance(metric, decomps[i].left, decomps[j].left, policy, scaled_procrustes)
            pairwise.append((i, j, d))
    return score_from_pairwise(pairwise, simplex_id)


def _totals(scores: Sequence[Union[ElementScore, float]]) -> np.ndarray:
    return np.array([s.total if isinstance(s, ElementScore) else float(s) for s in scores])


def mean_element_distance(scores: Sequence[Union[ElementScore, float]]) -> float:
    """d̃ = (1/n_e)·Σ D_k"""
    totals = _totals(scores)
    if totals.size == 0:
        raise DomainError("Mean element distance needs at least one element")
    return float(totals.mean())


def quantile_threshold(totals: Sequence[float], alpha: float) -> float:
    """Nearest-rank α-quantile: ascending[min(⌊α·n_e⌋, n_e − 1)]"""
    ordered = np.sort(np.asarray(totals, dtype=np.float64))
    if ordered.size == 0:
        raise DomainError("Cannot take a quantile of an empty score vector")
    return float(ordered[min(int(math.floor(alpha * ordered.size)), ordered.size - 1)])


def select_for_refinement(
    scores: Sequence[Union[ElementScore, float]],
    alpha: float,
    converged: Iterable[int] = (),
) -> List[int]:
    """
    Ids (positions in `scores`) of non-converged elements with D_k ≥ D_th,
    where D_th is the α-quantile of the full score vector.

    Raises:
        NothingToRefine: every element is converged
    """
    totals = _totals(scores)
    converged = set(converged)
    if all(k in converged for k in range(totals.size)):
        raise NothingToRefine("All elements are converged")
    threshold = quantile_threshold(totals, alpha)
    return [k for k in range(totals.size) if k not in converged and totals[k] >= threshold]


def vertex_error(
    actual: SnapshotDecomposition,
    predicted: SnapshotDecomposition,
    metric: Union[MetricKind, str],
    policy: RankPolicy,
    scaled_procrustes: bool = False,
) -> float:
    """θ̃ = sqrt(δ(Ψ, Ψ̃) / min(r, r̃))"""
    delta = subspace_distance(metric, actual.left, predicted.left, policy, scaled_procrustes)
    return math.sqrt(delta / min(actual.rank, predicted.rank))


def element_key(mesh: SimplexMesh, simplex_id: int) -> Tuple[int, ...]:
    return tuple(sorted(mesh.vertex_ids(simplex_id)))


def mark_convergence(
    mesh: SimplexMesh,
    records: Dict[int, VertexErrorRecord],
    theta_ref: float,
    level: int,
    persistent: Iterable[Tuple[int, ...]] = (),
) -> np.ndarray:
    """
    Per-element convergence flags.

    An element converges once at least n_d of its vertices carry a θ̃ ≤ θ_ref
    recorded before `level`. Elements whose vertex set appears in `persistent`
    stay converged.
    """
    persistent = set(persistent)
    flags = np.zeros(mesh.n_simplices, dtype=bool)
    for simplex_id in range(mesh.n_simplices):
        if element_key(mesh, simplex_id) in persistent:
            flags[simplex_id] = True
            continue
        satisfied = 0
        for vertex in mesh.vertex_ids(simplex_id):
            record = records.get(vertex)
            if record is not None and record.level < level and record.theta <= theta_ref:
                satisfied += 1
        flags[simplex_id] = satisfied >= mesh.n_d
    return flags


class ConvergenceTracker:
    """Keeps convergence flags alive across levels, keyed by element vertex sets"""

    def __init__(self, theta_ref: float, zero_tol: float = ZERO_SCORE_TOL):
        self.theta_ref = theta_ref
        self.zero_tol = zero_tol
        self.keys: Set[Tuple[int, ...]] = set()

    def update(
        self,
        mesh: SimplexMesh,
        records: Dict[int, VertexErrorRecord],
        level: int,
        scores: Sequence[Union[ElementScore, float]] = (),
    ) -> np.ndarray:
        """
        Flags for the current mesh. When every score vanishes the whole mesh is
        converged (nothing varies, so refining cannot help).
        """
        totals = _totals(scores)
        if totals.size and np.all(totals < self.zero_tol):
            flags = np.ones(mesh.n_simplices, dtype=bool)
        else:
            flags = mark_convergence(mesh, records, self.theta_ref, level, self.keys)
        for simplex_id in np.flatnonzero(flags):
            self.keys.add(element_key(mesh, int(simplex_id)))
        return flags
