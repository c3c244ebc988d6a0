"""Tangent-space interpolation of snapshot decompositions inside one simplex"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.config import SINGULAR_TOL, WEIGHT_TOL
from src.errors import AmbientMismatch, DomainError, NonPositiveSingular, SingularProduct
from src.grassmann import SubspacePoint, TangentVector, exp_map, log_map, thin_svd
from src.mesh import SimplexMesh
from src.snapshot import SnapshotDecomposition, reconstruct

ALIGNED = "aligned"
DIAGONAL = "diagonal"
MODES = (ALIGNED, DIAGONAL)


@dataclass(frozen=True, eq=False)
class ElementChart:
    """
    Vertex decompositions of one element lifted to the tangent spaces at the
    origin vertex's left and right factors.

    `vertex_cores[i]` is Xᵢᵀ·Fᵢ·Yᵢ, vertex i's truncated field seen in the frames
    Xᵢ = exp(Γᵢ^L) and Yᵢ = exp(Γᵢ^R) produced by the chart itself.
    """

    origin_index: int
    common_rank: int
    left_origin: SubspacePoint
    right_origin: SubspacePoint
    left_tangents: Tuple[TangentVector, ...]
    right_tangents: Tuple[TangentVector, ...]
    vertex_singulars: np.ndarray
    vertex_cores: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.left_tangents)


def choose_origin(decomps: Sequence[SnapshotDecomposition]) -> int:
    """Vertex with the largest rank before truncation; lowest index on ties"""
    ranks = [dec.rank for dec in decomps]
    return int(np.argmax(ranks))


def build_chart(
    decomps: Sequence[SnapshotDecomposition],
    origin_index: Optional[int] = None,
    singular_tol: float = SINGULAR_TOL,
) -> ElementChart:
    """
    Truncate every vertex to the common (minimum) rank and lift left and right
    factors with the logarithmic map at the origin vertex.

    Raises:
        SingularProduct: a vertex is too far from the origin; `vertex_index`
            names it
    """
    if not decomps:
        raise DomainError("Cannot build a chart without vertices")
    shapes = {dec.shape for dec in decomps}
    if len(shapes) != 1:
        raise AmbientMismatch(f"Vertex fields have different shapes: {sorted(shapes)}")
    if origin_index is None:
        origin_index = choose_origin(decomps)
    if not 0 <= origin_index < len(decomps):
        raise DomainError(f"Origin index {origin_index} out of range for {len(decomps)} vertices")

    common_rank = min(dec.rank for dec in decomps)
    truncated = [dec.truncate(common_rank) for dec in decomps]
    origin = truncated[origin_index]

    left_tangents, right_tangents, cores = [], [], []
    for index, dec in enumerate(truncated):
        if index == origin_index:
            gamma_left = TangentVector.zero(origin.left)
            gamma_right = TangentVector.zero(origin.right)
        else:
            try:
                gamma_left = log_map(origin.left, dec.left, singular_tol=singular_tol)
                gamma_right = log_map(origin.right, dec.right, singular_tol=singular_tol)
            except SingularProduct as e:
                raise SingularProduct(f"vertex {index}: {e}", vertex_index=index)
        frame_left = exp_map(origin.left, gamma_left).basis
        frame_right = exp_map(origin.right, gamma_right).basis
        cores.append(
            ((frame_left.T @ dec.left.basis) * dec.singular_values) @ (dec.right.basis.T @ frame_right)
        )
        left_tangents.append(gamma_left)
        right_tangents.append(gamma_right)

    return ElementChart(
        origin_index=origin_index,
        common_rank=common_rank,
        left_origin=origin.left,
        right_origin=origin.right,
        left_tangents=tuple(left_tangents),
        right_tangents=tuple(right_tangents),
        vertex_singulars=np.array([dec.singular_values for dec in truncated]),
        vertex_cores=np.array(cores),
    )


def _check_weights(weights: Sequence[float], count: int, tol: float) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if weights.size != count:
        raise DomainError(f"Expected {count} weights, got {weights.size}")
    if weights.min() < -tol or abs(weights.sum() - 1.0) > tol:
        raise DomainError(f"Weights must be nonnegative and sum to 1, got {weights.tolist()}")
    return weights


def interpolate_decomposition(
    chart: ElementChart,
    weights: Sequence[float],
    mode: str = ALIGNED,
    tol: float = WEIGHT_TOL,
) -> SnapshotDecomposition:
    """
    Γ̃ = Σ wᵢ Γᵢ for the left and right factors, mapped back with exp.

    Modes:
        aligned: the weighted mean of the vertex cores is re-diagonalised, which
            rotates the interpolated frames and yields the singular values
        diagonal: singular values are the entrywise weighted mean of the vertex
            singular values, frames are used as mapped

    Raises:
        NonPositiveSingular: an interpolated singular value is not positive
    """
    if mode not in MODES:
        raise DomainError(f"Unknown interpolation mode '{mode}' (expected one of: {', '.join(MODES)})")
    weights = _check_weights(weights, chart.n_vertices, tol)
    left = exp_map(chart.left_origin, TangentVector.combine(chart.left_tangents, weights)).basis
    right = exp_map(chart.right_origin, TangentVector.combine(chart.right_tangents, weights)).basis

    if mode == DIAGONAL:
        values = weights @ chart.vertex_singulars
        order = np.argsort(-values, kind="stable")
        values, left, right = values[order], left[:, order], right[:, order]
    else:
        core = np.tensordot(weights, chart.vertex_cores, axes=1)
        rotation_left, values, rotation_right_t = thin_svd(core)
        left = left @ rotation_left
        right = right @ rotation_right_t.T

    if values.min() <= 0.0:
        raise NonPositiveSingular(f"Interpolated singular values are not positive: {values.tolist()}")
    return SnapshotDecomposition(SubspacePoint(left), values, SubspacePoint(right))


def interpolate_field(
    chart: ElementChart, weights: Sequence[float], mode: str = ALIGNED
) -> np.ndarray:
    return reconstruct(interpolate_decomposition(chart, weights, mode=mode))


def predict(
    mesh: SimplexMesh,
    decompositions: Dict[int, SnapshotDecomposition],
    point: Sequence[float],
    simplex_id: Optional[int] = None,
    mode: str = ALIGNED,
) -> Tuple[int, np.ndarray, SnapshotDecomposition]:
    """
    Interpolated decomposition at `point`.

    Uses the given simplex, or the containing one when `simplex_id` is None.

    Returns:
        (simplex id, barycentric weights, decomposition)
    """
    if simplex_id is None:
        simplex_id, weights = mesh.locate(point)
    else:
        weights = mesh.barycentric_weights(simplex_id, point)
    weights = np.clip(weights, 0.0, None)
    weights = weights / weights.sum()
    chart = build_chart([decompositions[v] for v in mesh.vertex_ids(simplex_id)])
    return simplex_id, weights, interpolate_decomposition(chart, weights, mode=mode)
