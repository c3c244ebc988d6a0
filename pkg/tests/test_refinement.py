"""Tests for element scores, selection, vertex errors and convergence"""

import math

import numpy as np
import pytest

from src.errors import ConfigError, DomainError, NothingToRefine
from src.grassmann import SubspacePoint, distance_infinite
from src.mesh import initial_design
from src.refinement import (
    CampaignConfig,
    ConvergenceTracker,
    VertexErrorRecord,
    element_score,
    mark_convergence,
    mean_element_distance,
    quantile_threshold,
    score_from_pairwise,
    select_for_refinement,
    subspace_distance,
    vertex_error,
)
from src.snapshot import RankPolicy, SnapshotDecomposition


def decomposition(left: np.ndarray, values=None) -> SnapshotDecomposition:
    left = SubspacePoint.from_matrix(left)
    values = np.ones(left.rank) if values is None else values
    return SnapshotDecomposition(left, values, SubspacePoint(np.eye(left.rank + 1)[:, : left.rank]))


class TestCampaignConfig:
    """Test cases for CampaignConfig validation"""

    def test_defaults_are_valid(self):
        """Test the default settings"""
        config = CampaignConfig().validate()
        assert config.alpha == 0.80
        assert config.theta_ref == pytest.approx(math.pi / 15)

    @pytest.mark.parametrize(
        "key, value",
        [("alpha", 1.0), ("alpha", 0.0), ("theta_ref", 2.0), ("n_d", 7), ("budget", 4), ("metric", "euclid"),
         ("max_levels", 0), ("jobs", 0), ("interpolation_mode", "linear")],
    )
    def test_invalid_setting_names_key(self, key, value):
        """Test that the offending field is named"""
        config = CampaignConfig(**{key: value})
        with pytest.raises(ConfigError) as excinfo:
            config.validate()
        assert excinfo.value.key == key

    def test_to_dict(self):
        """Test the serialised form"""
        data = CampaignConfig(rank_policy=RankPolicy.global_(3)).to_dict()
        assert data["metric"] == "grassmann"
        assert data["rank_policy"] == "global:3"


class TestElementScore:
    """Test cases for element scores and the mean element distance"""

    def test_pairwise_sum_once(self):
        """Test D = 8.46 + 7.32 + 10.79 = 26.57, within 0.02 of the rounded total 26.59"""
        score = score_from_pairwise([(0, 1, 8.46), (0, 2, 7.32), (1, 2, 10.79)])
        assert score.total == pytest.approx(26.57, abs=1e-12)
        assert score.total == pytest.approx(26.59, abs=0.02)
        assert len(score.pairwise) == 3

    def test_mean_of_four_elements(self):
        """Test d̃ over four element totals"""
        assert mean_element_distance([26.59, 25.90, 45.55, 40.59]) == pytest.approx(34.6575, abs=1e-12)

    def test_single_element_mean(self):
        """Test d̃ = D₀ for one element"""
        score = score_from_pairwise([(0, 1, 0.7)])
        assert mean_element_distance([score]) == pytest.approx(0.7)
        with pytest.raises(DomainError):
            mean_element_distance([])

    def test_identical_vertices_score_zero(self):
        """Test D_k = 0 for coincident subspaces"""
        dec = decomposition(np.eye(5)[:, :2])
        score = element_score([dec] * 3, "grassmann", RankPolicy.tolerance())
        assert score.total < 1e-12
        assert len(score.pairwise) == 3

    @pytest.mark.parametrize("policy", [RankPolicy.tolerance(), RankPolicy.global_(2)])
    def test_matches_pairwise_oracle(self, policy):
        """Test the total against an independent pairwise sum"""
        rng = np.random.default_rng(60)
        decs = [decomposition(rng.standard_normal((12, 2))) for _ in range(4)]
        score = element_score(decs, "chordal", policy)
        oracle = sum(
            distance_infinite("chordal", decs[i].left, decs[j].left)
            for i in range(4) for j in range(i + 1, 4)
        )
        assert score.total == pytest.approx(oracle, abs=1e-12)
        assert score.total == pytest.approx(sum(d for _, _, d in score.pairwise), abs=1e-12)

    def test_distance_follows_rank_policy(self):
        """Test that unequal ranks use the doubly infinite distance"""
        a, b = SubspacePoint(np.eye(3)[:, :1]), SubspacePoint(np.eye(3)[:, :2])
        assert subspace_distance("grassmann", a, b, RankPolicy.tolerance()) == pytest.approx(math.pi / 2)


class TestSelection:
    """Test cases for quantile selection"""

    def test_top_twenty_percent(self):
        """Test that α = 0.8 over 10 distinct scores selects the top 2"""
        scores = [0.1, 0.9, 0.3, 0.5, 1.0, 0.2, 0.4, 0.6, 0.7, 0.8]
        assert select_for_refinement(scores, 0.8) == [1, 4]

    def test_all_equal(self):
        """Test that ties at the threshold are all selected"""
        assert select_for_refinement([1.0] * 5, 0.8) == [0, 1, 2, 3, 4]

    def test_converged_excluded(self):
        """Test that converged elements are skipped even above threshold"""
        scores = [0.1, 0.9, 0.3, 0.5, 1.0, 0.2, 0.4, 0.6, 0.7, 0.8]
        assert select_for_refinement(scores, 0.8, converged={4}) == [1]

    def test_largest_of_four(self):
        """Test that α = 0.8 over four element totals selects the largest"""
        assert select_for_refinement([26.59, 25.90, 45.55, 40.59], 0.8) == [2]

    def test_nothing_to_refine(self):
        """Test the all-converged case"""
        with pytest.raises(NothingToRefine):
            select_for_refinement([1.0, 2.0], 0.5, converged={0, 1})

    def test_nearest_rank_quantile(self):
        """Test the quantile definition"""
        assert quantile_threshold([4.0, 1.0, 3.0, 2.0], 0.5) == 3.0
        assert quantile_threshold([4.0, 1.0, 3.0, 2.0], 0.99) == 4.0

    def test_raising_alpha_never_enlarges_selection(self):
        """Test selection monotonicity in α"""
        rng = np.random.default_rng(61)
        for _ in range(50):
            scores = rng.random(int(rng.integers(2, 30)))
            converged = set(np.flatnonzero(rng.random(scores.size) < 0.2).tolist())
            if len(converged) == scores.size:
                continue
            low = set(select_for_refinement(scores, 0.5, converged))
            high = set(select_for_refinement(scores, 0.9, converged))
            assert high <= low


class TestVertexError:
    """Test cases for the average principal angle"""

    def test_identical(self):
        """Test θ̃ = 0 for identical decompositions"""
        dec = decomposition(np.eye(4)[:, :2])
        assert vertex_error(dec, dec, "grassmann", RankPolicy.tolerance()) == pytest.approx(0.0, abs=1e-7)

    def test_orthogonal_lines(self):
        """Test θ̃ = √(π/2) for orthogonal 1-planes"""
        a = decomposition(np.eye(3)[:, :1])
        b = decomposition(np.eye(3)[:, 1:2])
        assert vertex_error(a, b, "grassmann", RankPolicy.tolerance()) == pytest.approx(math.sqrt(math.pi / 2))

    def test_matches_principal_angles(self):
        """Test against a recomputation from principal angles"""
        rng = np.random.default_rng(62)
        a = decomposition(rng.standard_normal((10, 3)))
        b = decomposition(rng.standard_normal((10, 2)))
        sigma = np.linalg.svd(b.left.basis.T @ a.left.basis, compute_uv=False)
        theta = np.arccos(np.clip(sigma, 0, 1))
        delta = math.sqrt(math.pi ** 2 / 4 + np.sum(theta ** 2))
        assert vertex_error(a, b, "grassmann", RankPolicy.tolerance()) == pytest.approx(math.sqrt(delta / 2), abs=1e-7)

    def test_record_is_nonnegative(self):
        """Test the VertexErrorRecord invariant"""
        with pytest.raises(DomainError):
            VertexErrorRecord(point_id=0, theta=-0.1, level=1)


class TestConvergence:
    """Test cases for convergence flags"""

    @pytest.fixture
    def mesh(self):
        return initial_design(2)

    def test_two_satisfied_vertices(self, mesh):
        """Test that n_d = 2 satisfied vertices converge a triangle"""
        first = mesh.vertex_ids(0)
        records = {v: VertexErrorRecord(v, 0.0, 1) for v in first[:2]}
        flags = mark_convergence(mesh, records, math.pi / 15, level=2)
        assert flags[0]

    def test_same_level_records_do_not_count(self, mesh):
        """Test that only earlier levels count"""
        first = mesh.vertex_ids(0)
        records = {v: VertexErrorRecord(v, 0.0, 2) for v in first[:2]}
        assert not mark_convergence(mesh, records, math.pi / 15, level=2)[0]

    def test_initial_corners_not_converged(self, mesh):
        """Test that vertices without θ̃ never satisfy the criterion"""
        flags = mark_convergence(mesh, {}, math.pi / 15, level=1)
        assert not flags.any()

    def test_large_error_not_converged(self, mesh):
        """Test θ̃ above θ_ref"""
        records = {v: VertexErrorRecord(v, 1.0, 1) for v in mesh.vertex_ids(0)}
        assert not mark_convergence(mesh, records, math.pi / 15, level=2)[0]

    def test_tracker_persists_flags(self, mesh):
        """Test that a converged element stays converged when its records change"""
        tracker = ConvergenceTracker(math.pi / 15)
        vertices = mesh.vertex_ids(1)
        records = {v: VertexErrorRecord(v, 0.0, 1) for v in vertices}
        assert tracker.update(mesh, records, level=2, scores=[1.0] * 4)[1]
        worse = {v: VertexErrorRecord(v, 1.0, 1) for v in vertices}
        assert tracker.update(mesh, worse, level=3, scores=[5.0] * 4)[1]

    def test_zero_scores_converge_everything(self, mesh):
        """Test the zero-variation short-circuit"""
        tracker = ConvergenceTracker(math.pi / 15)
        assert tracker.update(mesh, {}, level=1, scores=[0.0] * 4).all()
