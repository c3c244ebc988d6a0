"""Delaunay discretization of the unit hypercube

The mesh owns an ordered point table and the simplices of its Delaunay
triangulation. Simplices are stored canonically (vertex ids ascending within a
row, rows in lexicographic order) and a simplex id is its row index, so the same
point set always yields the same ids. Meshes are immutable: `insert_point`
returns a new mesh and leaves the original untouched.
"""

import itertools
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.spatial import ConvexHull, Delaunay

from src.config import DUPLICATE_TOL, JITTER, MAX_STOCHASTIC_DIM, VOLUME_TOL, WEIGHT_TOL
from src.errors import DimensionUnsupported, DomainError, DuplicatePoint, OutsideSimplex

# Simplices thinner than this (absolute volume) are Qhull artefacts of
# cospherical input and are dropped.
DEGENERATE_VOLUME = 1e-14
BOUNDARY_PROBABILITY = 0.5
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def simplex_volume(vertices: np.ndarray) -> float:
    """|det[v₁ − v₀, …, v_n − v₀]| / n!  (0 for degenerate input)"""
    vertices = np.asarray(vertices, dtype=np.float64)
    n_d = vertices.shape[1]
    if vertices.shape[0] != n_d + 1:
        raise DomainError(f"A simplex in {n_d} dimensions needs {n_d + 1} vertices")
    edges = vertices[1:] - vertices[0]
    return abs(float(linalg.det(edges))) / math.factorial(n_d)


def barycentric_weights(vertices: np.ndarray, point: Sequence[float], tol: float = WEIGHT_TOL) -> np.ndarray:
    """
    Barycentric weights of `point` with respect to a simplex.

    Weight i is the signed volume of the simplex with vertex i replaced by the
    point, divided by the signed volume of the simplex.

    Raises:
        OutsideSimplex: some weight is below -tol
        DomainError: the simplex is degenerate
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    point = np.asarray(point, dtype=np.float64).ravel()
    homogeneous = np.vstack([vertices.T, np.ones(vertices.shape[0])])
    total = float(linalg.det(homogeneous))
    if abs(total) < DEGENERATE_VOLUME:
        raise DomainError("Cannot compute barycentric weights in a degenerate simplex")
    lifted = np.append(point, 1.0)
    weights = np.empty(vertices.shape[0])
    for i in range(vertices.shape[0]):
        replaced = homogeneous.copy()
        replaced[:, i] = lifted
        weights[i] = float(linalg.det(replaced)) / total
    if weights.min() < -tol:
        raise OutsideSimplex(
            f"Point {point.tolist()} lies outside the simplex (min weight {weights.min():.3e})"
        )
    return weights


def face_centers(vertices: np.ndarray) -> np.ndarray:
    """
    Vertices of the inner sub-simplex: vertex l is the mean of all vertices but l.

    A segment has no proper face centers, so it is shrunk by 0.5 toward its
    midpoint instead.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    count = vertices.shape[0]
    if count == 1:
        return vertices.copy()
    if count == 2:
        middle = vertices.mean(axis=0)
        return middle + 0.5 * (vertices - middle)
    return (vertices.sum(axis=0) - vertices) / (count - 1)


def uniform_in_simplex(vertices: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform point inside a simplex via flat Dirichlet weights (normalized exponentials)"""
    spacings = rng.exponential(size=vertices.shape[0])
    return (spacings / spacings.sum()) @ vertices


def _canonical(simplices: np.ndarray) -> np.ndarray:
    rows = np.sort(np.asarray(simplices, dtype=np.int64), axis=1)
    if rows.size == 0:
        return rows
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def _lexicographic_jitter(points: np.ndarray) -> np.ndarray:
    """Deterministic sub-tolerance perturbation ordered by lexicographic rank"""
    n_points, n_d = points.shape
    order = np.lexsort(points.T[::-1])
    ranks = np.empty(n_points)
    ranks[order] = np.arange(1, n_points + 1)
    exponents = np.arange(1, n_d + 1)
    offsets, _ = np.modf(np.outer(ranks, _GOLDEN ** exponents))
    return points + JITTER * (offsets - 0.5)


def _qhull_simplices(points: np.ndarray) -> np.ndarray:
    n_d = points.shape[1]
    if n_d == 1:
        order = np.argsort(points[:, 0], kind="stable")
        return np.column_stack([order[:-1], order[1:]])
    options = "Qbb Qc Qz Q12 Qt" if n_d <= 4 else "Qbb Qc Qx Q12 Qt"
    return Delaunay(points, qhull_options=options).simplices


def _hull_volume(points: np.ndarray) -> float:
    if points.shape[1] == 1:
        return float(points.max() - points.min())
    return float(ConvexHull(points).volume)


def triangulate(points: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Canonical Delaunay simplices of a point set.

    Degenerate simplices are dropped. When the remaining volume does not match
    the convex hull, connectivity is recomputed on a lexicographically jittered
    copy of the points (stored coordinates are unchanged).

    Returns:
        (simplices, jittered)
    """
    points = np.asarray(points, dtype=np.float64)
    target = _hull_volume(points)
    jittered = False
    for attempt in range(2):
        source = points if attempt == 0 else _lexicographic_jitter(points)
        simplices = _canonical(_qhull_simplices(source))
        volumes = np.array([simplex_volume(points[row]) for row in simplices])
        keep = volumes > DEGENERATE_VOLUME
        simplices, volumes = simplices[keep], volumes[keep]
        if abs(volumes.sum() - target) <= VOLUME_TOL:
            return simplices, jittered
        jittered = True
    raise DomainError(
        f"Triangulation volume {volumes.sum():.12f} does not match hull volume {target:.12f}"
    )


class SimplexMesh:
    """Delaunay triangulation of the unit hypercube [0, 1]^n_d"""

    def __init__(self, points: np.ndarray, simplices: Optional[np.ndarray] = None):
        points = np.array(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < points.shape[1] + 1:
            raise DomainError(f"Need at least n_d + 1 points, got array of shape {points.shape}")
        n_d = points.shape[1]
        if not 1 <= n_d <= MAX_STOCHASTIC_DIM:
            raise DimensionUnsupported(f"Stochastic dimension must be in 1..{MAX_STOCHASTIC_DIM}, got {n_d}")
        if np.any(points < 0.0) or np.any(points > 1.0):
            raise DomainError("Mesh points must lie in the unit hypercube")
        if simplices is None:
            simplices, self.jittered = triangulate(points)
        else:
            simplices = _canonical(simplices)
            self.jittered = False
        points.setflags(write=False)
        simplices.setflags(write=False)
        self.points = points
        self.simplices = simplices

    @property
    def n_d(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_simplices(self) -> int:
        return self.simplices.shape[0]

    def vertex_ids(self, simplex_id: int) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.simplices[simplex_id])

    def vertices(self, simplex_id: int) -> np.ndarray:
        return self.points[self.simplices[simplex_id]]

    def centroid(self, simplex_id: int) -> np.ndarray:
        return self.vertices(simplex_id).mean(axis=0)

    def volume(self, simplex_id: int) -> float:
        return simplex_volume(self.vertices(simplex_id))

    def volumes(self) -> np.ndarray:
        return np.array([self.volume(k) for k in range(self.n_simplices)])

    def total_volume(self) -> float:
        return float(self.volumes().sum())

    def barycentric_weights(self, simplex_id: int, point: Sequence[float], tol: float = WEIGHT_TOL) -> np.ndarray:
        return barycentric_weights(self.vertices(simplex_id), point, tol=tol)

    def locate(self, point: Sequence[float], tol: float = WEIGHT_TOL) -> Tuple[int, np.ndarray]:
        """
        Simplex containing `point` and the point's weights in it.

        Among simplices sharing the point on a face, the one with the largest
        minimum weight wins (lowest id on ties).
        """
        point = np.asarray(point, dtype=np.float64).ravel()
        if point.size != self.n_d:
            raise DomainError(f"Point has {point.size} coordinates, mesh has {self.n_d}")
        best_id, best_weights, best_min = -1, None, -np.inf
        for simplex_id in range(self.n_simplices):
            weights = barycentric_weights(self.vertices(simplex_id), point, tol=np.inf)
            if weights.min() > best_min:
                best_id, best_weights, best_min = simplex_id, weights, weights.min()
        if best_min < -tol:
            raise OutsideSimplex(f"Point {point.tolist()} lies outside every simplex")
        return best_id, best_weights

    def sub_simplex(self, simplex_id: int) -> np.ndarray:
        return face_centers(self.vertices(simplex_id))

    def boundary_facets(self, simplex_id: int) -> List[Tuple[Tuple[int, ...], int, float]]:
        """
        Facets lying on the hypercube boundary.

        Returns:
            (local vertex indices, axis, fixed value) per boundary facet
        """
        vertices = self.vertices(simplex_id)
        facets = []
        for dropped in range(self.n_d + 1):
            local = tuple(i for i in range(self.n_d + 1) if i != dropped)
            facet = vertices[list(local)]
            for axis in range(self.n_d):
                for value in (0.0, 1.0):
                    if np.all(facet[:, axis] == value):
                        facets.append((local, axis, value))
        return facets

    def sample_refinement_point(
        self,
        simplex_id: int,
        rng: np.random.Generator,
        boundary_probability: float = BOUNDARY_PROBABILITY,
    ) -> np.ndarray:
        """
        New sample for a selected simplex.

        If the simplex touches the hypercube boundary with a whole facet, then with
        probability `boundary_probability` the point is drawn uniformly from the
        face-center sub-simplex of a uniformly chosen boundary facet; otherwise it
        is drawn uniformly from the sub-simplex of the element itself. Segments
        (n_d = 1) have no boundary facets of positive measure.
        """
        vertices = self.vertices(simplex_id)
        facets = self.boundary_facets(simplex_id) if self.n_d > 1 else []
        if facets and rng.random() < boundary_probability:
            local, axis, value = facets[int(rng.integers(len(facets)))]
            point = uniform_in_simplex(face_centers(vertices[list(local)]), rng)
            point[axis] = value
        else:
            point = uniform_in_simplex(self.sub_simplex(simplex_id), rng)
        return np.clip(point, 0.0, 1.0)

    def insert_point(self, point: Sequence[float], tol: float = DUPLICATE_TOL) -> "SimplexMesh":
        """New mesh with `point` appended (existing point ids keep their index)"""
        point = np.asarray(point, dtype=np.float64).ravel()
        if point.size != self.n_d:
            raise DomainError(f"Point has {point.size} coordinates, mesh has {self.n_d}")
        distances = np.linalg.norm(self.points - point, axis=1)
        nearest = int(np.argmin(distances))
        if distances[nearest] <= tol:
            raise DuplicatePoint(
                f"Point {point.tolist()} coincides with point {nearest} (distance {distances[nearest]:.3e})"
            )
        return SimplexMesh(np.vstack([self.points, point]))

    def circumsphere(self, simplex_id: int) -> Tuple[np.ndarray, float]:
        vertices = self.vertices(simplex_id)
        edges = vertices[1:] - vertices[0]
        rhs = 0.5 * np.sum(edges ** 2, axis=1)
        offset = linalg.solve(edges, rhs)
        return vertices[0] + offset, float(np.linalg.norm(offset))

    def is_delaunay(self, tol: float = 1e-9) -> bool:
        """Brute-force empty-circumsphere test over every simplex/point pair"""
        for simplex_id in range(self.n_simplices):
            center, radius = self.circumsphere(simplex_id)
            distances = np.linalg.norm(self.points - center, axis=1)
            distances[self.simplices[simplex_id]] = np.inf
            if np.any(distances < radius - tol):
                return False
        return True

    def point_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.points, columns=[f"xi_{j + 1}" for j in range(self.n_d)])
        frame.insert(0, "point_id", np.arange(self.n_points))
        return frame

    def simplex_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.simplices, columns=[f"v{j}" for j in range(self.n_d + 1)])
        frame.insert(0, "simplex_id", np.arange(self.n_simplices))
        return frame

    @classmethod
    def from_frames(cls, points: pd.DataFrame, simplices: pd.DataFrame) -> "SimplexMesh":
        """Rebuild a mesh from its exported tables"""
        points = points.sort_values("point_id")
        simplices = simplices.sort_values("simplex_id")
        coords = points[[c for c in points.columns if c.startswith("xi_")]].to_numpy(dtype=np.float64)
        rows = simplices[[c for c in simplices.columns if c.startswith("v")]].to_numpy(dtype=np.int64)
        return cls(coords, rows)


def initial_design(n_d: int, interior: Optional[Sequence[float]] = None) -> SimplexMesh:
    """
    The 2^n_d hypercube corners plus one interior point (default: the centroid).

    Corners come first in lexicographic order, the interior point last.
    """
    if not 1 <= n_d <= MAX_STOCHASTIC_DIM:
        raise DimensionUnsupported(f"Stochastic dimension must be in 1..{MAX_STOCHASTIC_DIM}, got {n_d}")
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=n_d)))
    centre = np.full(n_d, 0.5) if interior is None else np.asarray(interior, dtype=np.float64)
    if centre.shape != (n_d,) or np.any(centre <= 0.0) or np.any(centre >= 1.0):
        raise DomainError("Interior point must lie strictly inside the hypercube")
    return SimplexMesh(np.vstack([corners, centre]))
