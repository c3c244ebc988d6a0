"""Tests for synthetic models, parameter maps and the external solver exchange"""

import json
import math
import threading
import time

import numpy as np
import pytest

from src.errors import ConfigError, DomainError, ExchangeTimeout, MalformedSnapshot
from src.grassmann import principal_angles
from src.models import (
    ExternalExchange,
    ModelSpec,
    ParamMap,
    SyntheticSmooth,
    SyntheticTransition,
    build_model,
    evaluate,
    map_params,
    sine_modes,
)
from src.snapshot import FieldSnapshot, RankPolicy, decompose
from src.snapshot_storage import write_gfld


class TestParamMap:
    """Test cases for the affine parameter map"""

    @pytest.fixture
    def param_map(self):
        return ParamMap([500.0, 0.0], [700.0, 0.1])

    @pytest.mark.parametrize(
        "xi, expected", [((0, 0), (500, 0)), ((1, 1), (700, 0.1)), ((0.5, 0.5), (600, 0.05))]
    )
    def test_mapping(self, param_map, xi, expected):
        """Test corners and midpoint"""
        assert map_params(param_map, xi) == pytest.approx(list(expected))

    def test_requires_hi_above_lo(self):
        """Test the ordering invariant"""
        with pytest.raises(DomainError):
            ParamMap([1.0], [1.0])

    def test_dimension_check(self, param_map):
        """Test the coordinate count"""
        with pytest.raises(DomainError):
            param_map([0.5])


class TestSyntheticModels:
    """Test cases for the synthetic field families"""

    def test_sine_modes_orthonormal(self):
        """Test the discrete sine basis"""
        modes = sine_modes(25, 6)
        assert np.allclose(modes.T @ modes, np.eye(6), atol=1e-12)

    def test_sine_mode_formula(self):
        """Test that column q is proportional to sin(πq·a/n) over a = 0..n-1"""
        modes = sine_modes(12, 3)
        a = np.arange(12)
        for q in range(1, 4):
            expected = np.sin(np.pi * q * a / 12)
            assert np.allclose(modes[:, q - 1], expected / np.linalg.norm(expected), atol=1e-14)
        assert np.allclose(modes[0], 0.0)

    def test_sine_modes_reject_too_many(self):
        """Test that a length-n basis holds at most n - 1 modes"""
        with pytest.raises(DomainError):
            sine_modes(6, 6)

    def test_constant_coefficients(self):
        """Test that zero variation gives one field everywhere"""
        model = SyntheticSmooth(2, 20, 10, variation=0.0)
        assert np.array_equal(model.evaluate([0.1, 0.2]).field, model.evaluate([0.9, 0.7]).field)

    def test_transition_switches_subspace(self):
        """Test an O(1) principal angle across the curve"""
        model = SyntheticTransition(2, 40, 30)
        below = decompose(model.evaluate([0.5, 0.1]), RankPolicy.tolerance())
        above = decompose(model.evaluate([0.5, 0.9]), RankPolicy.tolerance())
        assert principal_angles(below.left, above.left).largest > math.pi / 4

    def test_transition_is_deterministic(self):
        """Test bit-identical repeated evaluation"""
        model = SyntheticTransition(3, 20, 10)
        xi = [0.3, 0.45, 0.8]
        assert np.array_equal(model.evaluate(xi).field, model.evaluate(xi).field)

    @pytest.mark.parametrize(
        "model", [SyntheticSmooth(3, 30, 20, drift=0.7), SyntheticTransition(2, 30, 20, n_modes=3)]
    )
    def test_field_norm_bound(self, model):
        """Test ‖F(ξ)‖_F against the advertised bound"""
        rng = np.random.default_rng(80)
        bound = model.field_norm_bound()
        for xi in rng.random((100, model.n_d)):
            assert np.linalg.norm(model.evaluate(xi).field) <= bound + 1e-12

    def test_transition_band(self):
        """Test band membership around ξ₂ = 0.4 + 0.2ξ₁"""
        model = SyntheticTransition(2, 10, 5)
        assert model.in_transition_band([0.5, 0.5])
        assert model.in_transition_band([1.0, 0.65])
        assert not model.in_transition_band([0.0, 0.2])

    def test_rejects_points_outside_cube(self):
        """Test the unit-cube check on evaluation"""
        with pytest.raises(DomainError):
            SyntheticSmooth(2, 10, 5).evaluate([1.2, 0.0])

    def test_transition_needs_two_dimensions(self):
        """Test the dimension requirement"""
        with pytest.raises(DomainError):
            SyntheticTransition(1, 10, 5)


class TestExternalExchange:
    """Test cases for file-exchange coupling"""

    @pytest.fixture
    def exchange(self, tmp_path):
        return ExternalExchange(tmp_path, n_d=2, n_f=3, m_f=2, timeout=5.0, poll_interval=0.01)

    def test_request_and_response(self, exchange):
        """Test that the deposited field is returned bit-exactly"""
        fixed = np.arange(6, dtype=float).reshape(3, 2) / 7.0
        request_id = exchange.submit([0.2, 0.3])
        with open(exchange.request_path(request_id), "r", encoding="utf-8") as f:
            assert json.load(f) == {"id": request_id, "xi": [0.2, 0.3]}
        write_gfld(exchange.response_path(request_id), FieldSnapshot(fixed))
        snapshot = exchange.collect(request_id, [0.2, 0.3])
        assert np.array_equal(snapshot.field, fixed)
        assert np.array_equal(snapshot.params, [0.2, 0.3])

    def test_stub_solver(self, exchange):
        """Test evaluate() against a solver thread echoing a fixed matrix"""
        fixed = np.ones((3, 2))
        stop = threading.Event()

        def solver():
            while not stop.is_set():
                for request in exchange.directory.glob("req_*.json"):
                    response = exchange.directory / request.name.replace("req_", "resp_").replace(".json", ".gfld")
                    if not response.exists():
                        write_gfld(response, FieldSnapshot(fixed))
                time.sleep(0.01)

        thread = threading.Thread(target=solver, daemon=True)
        thread.start()
        try:
            snapshots = [exchange.evaluate([0.1 * k, 0.5]) for k in range(3)]
        finally:
            stop.set()
            thread.join()
        assert all(np.array_equal(s.field, fixed) for s in snapshots)

    def test_ids_continue_after_existing_requests(self, tmp_path):
        """Test monotone request ids across exchange instances"""
        (tmp_path / "req_4.json").write_text("{}", encoding="utf-8")
        exchange = ExternalExchange(tmp_path, n_d=1, n_f=2, m_f=2)
        assert exchange.submit([0.5]) == 5
        assert exchange.submit([0.6]) == 6

    def test_param_map_in_request(self, tmp_path):
        """Test that physical coordinates accompany ξ"""
        exchange = ExternalExchange(tmp_path, n_d=1, n_f=2, m_f=2, param_map=ParamMap([10.0], [20.0]))
        request_id = exchange.submit([0.5])
        with open(exchange.request_path(request_id), "r", encoding="utf-8") as f:
            assert json.load(f)["physical"] == [15.0]

    def test_timeout(self, tmp_path):
        """Test that a silent solver times out with the point attached"""
        exchange = ExternalExchange(tmp_path, n_d=1, n_f=2, m_f=2, timeout=0.05, poll_interval=0.01)
        with pytest.raises(ExchangeTimeout) as excinfo:
            exchange.evaluate([0.25])
        assert list(excinfo.value.xi) == [0.25]

    def test_shape_mismatch(self, exchange):
        """Test that a wrongly shaped response is rejected"""
        request_id = exchange.submit([0.5, 0.5])
        write_gfld(exchange.response_path(request_id), FieldSnapshot(np.ones((2, 2))))
        with pytest.raises(MalformedSnapshot):
            exchange.collect(request_id, [0.5, 0.5])


class TestModelSpec:
    """Test cases for ModelSpec and build_model"""

    def test_builds_each_kind(self, tmp_path):
        """Test model construction from a ModelSpec"""
        assert isinstance(build_model(ModelSpec(kind="synthetic_smooth")), SyntheticSmooth)
        assert isinstance(build_model(ModelSpec()), SyntheticTransition)
        spec = ModelSpec(kind="external_exchange", exchange_dir=str(tmp_path / "x"))
        assert isinstance(build_model(spec), ExternalExchange)

    def test_evaluate_helper(self):
        """Test evaluate(spec, ξ)"""
        snapshot = evaluate(ModelSpec(kind="synthetic_smooth", n_f=12, m_f=8), [0.5, 0.5])
        assert snapshot.shape == (12, 8)

    @pytest.mark.parametrize(
        "spec, key",
        [
            (ModelSpec(kind="fem"), "model.kind"),
            (ModelSpec(n_f=0), "model.n_f"),
            (ModelSpec(kind="external_exchange"), "model.exchange_dir"),
            (ModelSpec(n_d=1), "model.synthetic_transition"),
            (ModelSpec(param_lo=[0.0], param_hi=[1.0]), "model.param_lo"),
        ],
    )
    def test_validation_names_key(self, spec, key):
        """Test that an invalid ModelSpec names the offending key"""
        with pytest.raises(ConfigError) as excinfo:
            spec.validate()
        assert excinfo.value.key == key
