"""Tests for tangent-space interpolation inside a simplex"""

import numpy as np
import pytest

from src.errors import AmbientMismatch, DomainError, SingularProduct
from src.grassmann import SubspacePoint, distance_equidim, exp_map, geodesic, log_map
from src.interpolation import (
    DIAGONAL,
    build_chart,
    choose_origin,
    interpolate_decomposition,
    interpolate_field,
    predict,
)
from src.mesh import initial_design
from src.models import SyntheticSmooth
from src.snapshot import FieldSnapshot, RankPolicy, SnapshotDecomposition, decompose, reconstruct


def random_decomposition(rng, n_f, m_f, rank, left=None, right=None):
    left = left if left is not None else SubspacePoint.random(n_f, rank, rng)
    right = right if right is not None else SubspacePoint.random(m_f, rank, rng)
    values = np.sort(rng.uniform(1.0, 3.0, rank))[::-1]
    return SnapshotDecomposition(left, values, right)


def nearby_decomposition(base, rng, scale=0.1):
    left = SubspacePoint.from_matrix(base.left.basis + scale * rng.standard_normal(base.left.basis.shape))
    right = SubspacePoint.from_matrix(base.right.basis + scale * rng.standard_normal(base.right.basis.shape))
    values = np.sort(base.singular_values * (1 + 0.05 * rng.random(base.rank)))[::-1]
    return SnapshotDecomposition(left, values, right)


class TestBuildChart:
    """Test cases for build_chart"""

    @pytest.fixture
    def vertices(self):
        rng = np.random.default_rng(50)
        base = random_decomposition(rng, 40, 25, 3)
        return [base] + [nearby_decomposition(base, rng) for _ in range(2)]

    def test_identical_vertices_give_zero_tangents(self, vertices):
        """Test that a constant element lifts to the origin"""
        chart = build_chart([vertices[0]] * 3)
        for tangents in (chart.left_tangents, chart.right_tangents):
            for i, gamma in enumerate(tangents):
                if i == chart.origin_index:
                    assert np.array_equal(gamma.matrix, np.zeros_like(gamma.matrix))
                else:
                    assert np.allclose(gamma.matrix, 0.0, atol=1e-12)

    def test_two_vertex_chart(self, vertices):
        """Test Γ₁ = log_map(Ψ₀, Ψ₁)"""
        chart = build_chart(vertices[:2], origin_index=0)
        expected = log_map(vertices[0].left, vertices[1].left)
        assert np.allclose(chart.left_tangents[1].matrix, expected.matrix)
        assert chart.n_vertices == 2

    def test_tangents_map_back_to_vertices(self, vertices):
        """Test exp_map(origin, Γᵢ) spans vertex i"""
        chart = build_chart(vertices)
        for i, dec in enumerate(vertices):
            mapped = exp_map(chart.left_origin, chart.left_tangents[i])
            assert distance_equidim("grassmann", mapped, dec.left) < 1e-8

    def test_common_rank_truncation(self):
        """Test truncation to the minimum rank and origin choice"""
        rng = np.random.default_rng(51)
        high = random_decomposition(rng, 20, 15, 4)
        low = high.truncate(2)
        chart = build_chart([low, high, low])
        assert chart.common_rank == 2
        assert chart.origin_index == 1
        assert chart.vertex_singulars.shape == (3, 2)

    def test_choose_origin(self):
        """Test largest rank, lowest index on ties"""
        rng = np.random.default_rng(52)
        decs = [random_decomposition(rng, 10, 8, r) for r in (2, 3, 3)]
        assert choose_origin(decs) == 1

    def test_shape_mismatch(self):
        """Test that vertices must share the field shape"""
        rng = np.random.default_rng(53)
        with pytest.raises(AmbientMismatch):
            build_chart([random_decomposition(rng, 10, 8, 2), random_decomposition(rng, 11, 8, 2)])

    def test_singular_vertex_is_named(self):
        """Test that the failing vertex index is reported"""
        e = np.eye(3)
        right = SubspacePoint(np.eye(2)[:, :1])
        decs = [
            SnapshotDecomposition(SubspacePoint(e[:, :1]), [1.0], right),
            SnapshotDecomposition(SubspacePoint(e[:, 1:2]), [1.0], right),
        ]
        with pytest.raises(SingularProduct) as excinfo:
            build_chart(decs, origin_index=0)
        assert excinfo.value.vertex_index == 1


class TestInterpolateDecomposition:
    """Test cases for interpolate_decomposition and interpolate_field"""

    @pytest.fixture
    def vertices(self):
        rng = np.random.default_rng(54)
        base = random_decomposition(rng, 30, 20, 3)
        return [base] + [nearby_decomposition(base, rng) for _ in range(2)]

    @pytest.mark.parametrize("mode", ["aligned", "diagonal"])
    def test_origin_indicator(self, vertices, mode):
        """Test that the origin's weights return the origin decomposition"""
        chart = build_chart(vertices, origin_index=0)
        result = interpolate_decomposition(chart, [1.0, 0.0, 0.0], mode=mode)
        assert np.allclose(result.singular_values, vertices[0].singular_values, atol=1e-12)
        assert np.allclose(reconstruct(result), reconstruct(vertices[0]), atol=1e-10)

    def test_vertex_indicator(self, vertices):
        """Test that vertex j's weights reproduce vertex j"""
        chart = build_chart(vertices, origin_index=0)
        for j in (1, 2):
            weights = np.eye(3)[j]
            result = interpolate_decomposition(chart, weights)
            assert distance_equidim("grassmann", result.left, vertices[j].left) < 1e-8
            field = interpolate_field(chart, weights)
            truth = reconstruct(vertices[j])
            assert np.linalg.norm(field - truth) < 1e-8 * np.linalg.norm(truth)

    def test_diagonal_mode_averages_singular_values(self, vertices):
        """Test Σ̃ as the weighted mean of the vertex singular values"""
        chart = build_chart(vertices, origin_index=0)
        weights = np.array([0.2, 0.3, 0.5])
        result = interpolate_decomposition(chart, weights, mode=DIAGONAL)
        expected = np.sort(weights @ np.array([v.singular_values for v in vertices]))[::-1]
        assert np.allclose(result.singular_values, expected)

    def test_factors_orthonormal(self, vertices):
        """Test orthonormality of the interpolated factors"""
        chart = build_chart(vertices)
        result = interpolate_decomposition(chart, [0.3, 0.3, 0.4])
        for basis in (result.left.basis, result.right.basis):
            assert np.allclose(basis.T @ basis, np.eye(3), atol=1e-8)

    def test_constant_family(self, vertices):
        """Test that identical vertices interpolate to the same field everywhere"""
        chart = build_chart([vertices[0]] * 3)
        rng = np.random.default_rng(55)
        for _ in range(5):
            field = interpolate_field(chart, rng.dirichlet(np.ones(3)))
            assert np.allclose(field, reconstruct(vertices[0]), atol=1e-10)

    def test_relabeling_invariance(self, vertices):
        """Test that permuting non-origin vertices with their weights changes nothing"""
        weights = np.array([0.5, 0.2, 0.3])
        first = interpolate_field(build_chart(vertices, origin_index=0), weights)
        swapped = [vertices[0], vertices[2], vertices[1]]
        second = interpolate_field(build_chart(swapped, origin_index=0), weights[[0, 2, 1]])
        assert np.allclose(first, second, atol=1e-10)

    def test_common_geodesic(self):
        """Test that vertices on one geodesic interpolate along it"""
        rng = np.random.default_rng(56)
        a = SubspacePoint.random(15, 2, rng)
        b = SubspacePoint.from_matrix(a.basis + 0.4 * rng.standard_normal(a.basis.shape))
        right = SubspacePoint(np.eye(5)[:, :2])
        values = np.array([2.0, 1.0])
        decs = [SnapshotDecomposition(p, values, right) for p in (a, b, geodesic(a, b, 0.5))]
        chart = build_chart(decs, origin_index=0)
        for z in (0.25, 0.6):
            result = interpolate_decomposition(chart, [1 - z, z, 0.0])
            assert distance_equidim("grassmann", result.left, geodesic(a, b, z)) < 1e-6

    def test_invalid_weights(self, vertices):
        """Test weight and mode validation"""
        chart = build_chart(vertices)
        with pytest.raises(DomainError):
            interpolate_decomposition(chart, [0.5, 0.6, -0.1])
        with pytest.raises(DomainError):
            interpolate_decomposition(chart, [0.5, 0.5])
        with pytest.raises(DomainError):
            interpolate_decomposition(chart, [1.0, 0.0, 0.0], mode="linear")


class TestSmoothFamily:
    """Test cases for interpolation of a smoothly varying model"""

    @pytest.fixture
    def model(self):
        return SyntheticSmooth(2, 40, 30, n_modes=3, drift=1.0)

    def centroid_error(self, model, h):
        policy = RankPolicy.global_(3)
        corner = np.array([0.3, 0.3])
        points = corner + h * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        fields = [model.evaluate(p).field for p in points]
        decs = [decompose(FieldSnapshot(f), policy) for f in fields]
        predicted = interpolate_field(build_chart(decs), np.full(3, 1 / 3))
        truth = model.evaluate(points.mean(axis=0)).field
        spread = max(np.linalg.norm(fi - fj) for fi in fields for fj in fields)
        return np.linalg.norm(predicted - truth), spread

    def test_error_bounded_by_vertex_spread(self, model):
        """Test centroid error against the vertex-to-vertex field differences"""
        error, spread = self.centroid_error(model, 0.2)
        assert error <= 10 * spread

    def test_error_shrinks_with_element(self, model):
        """Test an empirical order of at least 0.9 over three halvings"""
        errors = [self.centroid_error(model, h)[0] for h in (0.2, 0.1, 0.05, 0.025)]
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 0.9)


class TestPredict:
    """Test cases for prediction on a mesh"""

    @pytest.fixture
    def setup(self):
        model = SyntheticSmooth(2, 24, 16, n_modes=2, drift=0.8)
        mesh = initial_design(2)
        decs = {pid: decompose(model.evaluate(p), RankPolicy.global_(2)) for pid, p in enumerate(mesh.points)}
        return mesh, decs

    def test_predict_at_vertex(self, setup):
        """Test that prediction at a sample point reproduces its field"""
        mesh, decs = setup
        _, weights, predicted = predict(mesh, decs, mesh.points[4])
        assert weights.sum() == pytest.approx(1.0)
        assert np.allclose(reconstruct(predicted), reconstruct(decs[4]), atol=1e-8)

    def test_predict_in_given_simplex(self, setup):
        """Test prediction with an explicit simplex id"""
        mesh, decs = setup
        point = mesh.centroid(2)
        simplex_id, weights, predicted = predict(mesh, decs, point, simplex_id=2)
        assert simplex_id == 2
        assert np.allclose(weights, 1 / 3)
        assert predicted.rank == 2
