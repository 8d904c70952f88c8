import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rckoopman.errors import ConstructionError, DomainError, NumericError, ShapeError
from rckoopman.reservoir import (
    Reservoir,
    ReservoirConfig,
    build_reservoir,
    check_esp,
    drive,
    input_jacobians,
    memory_horizon,
    sensitivity_profile,
)


def scalar_linear(w=0.5, w_in=1.0):
    return Reservoir.from_matrices([[w]], [[w_in]], activation="identity")


def test_spectral_radius_is_exact():
    res = build_reservoir(ReservoirConfig(n_r=30, n_v=2, spectral_radius=0.9, seed=4))
    assert abs(res.actual_spectral_radius - 0.9) <= 1e-9 * 0.9
    assert res.W_res.shape == (30, 30) and res.W_in.shape == (30, 2)


def test_construction_is_deterministic():
    cfg = ReservoirConfig(n_r=10, n_v=2, seed=11)
    a, b = build_reservoir(cfg), build_reservoir(cfg)
    np.testing.assert_array_equal(a.W_res, b.W_res)
    np.testing.assert_array_equal(a.W_in, b.W_in)


def test_spectral_norm_dominates_radius():
    res = build_reservoir(ReservoirConfig(n_r=50, n_v=1, spectral_radius=0.5, density=1.0, seed=0))
    assert res.spectral_norm_W_res >= 0.5


def test_weights_are_read_only():
    res = build_reservoir(ReservoirConfig(n_r=5, n_v=1))
    with pytest.raises(ValueError):
        res.W_res[0, 0] = 1.0


def test_zero_radius_raises():
    # a single entry dropped by the density mask leaves a zero matrix
    for seed in range(200):
        rng = np.random.default_rng(seed)
        rng.uniform(size=(1, 1))
        if rng.random((1, 1))[0, 0] >= 0.05:
            break
    with pytest.raises(ConstructionError):
        build_reservoir(ReservoirConfig(n_r=1, n_v=1, density=0.05, seed=seed))


@pytest.mark.parametrize("kwargs", [{"n_r": 0}, {"spectral_radius": 0.0}, {"density": 0.0}, {"density": 1.5},
                                    {"activation": "relu"}])
def test_invalid_config(kwargs):
    base = {"n_r": 4, "n_v": 1}
    base.update(kwargs)
    with pytest.raises((DomainError, ValueError)):
        ReservoirConfig(**base)


def test_zero_input_stays_at_origin():
    res = build_reservoir(ReservoirConfig(n_r=8, n_v=2))
    np.testing.assert_array_equal(drive(res, np.zeros((20, 2))), 0.0)


def test_linear_scalar_unroll():
    np.testing.assert_allclose(drive(scalar_linear(), [[1.0], [1.0], [1.0]]).ravel(), [1.0, 1.5, 1.75])


def test_washout_alignment():
    res = build_reservoir(ReservoirConfig(n_r=6, n_v=1, seed=2))
    v = np.random.default_rng(0).normal(size=(30, 1))
    np.testing.assert_array_equal(drive(res, v, washout=10), drive(res, v)[10:])


def test_drive_errors():
    res = scalar_linear(w=10.0)
    with pytest.raises(ShapeError):
        drive(res, [[1.0]], washout=1)
    with pytest.raises(ShapeError):
        drive(res, [[1.0]], r0=[0.0, 0.0])
    with pytest.raises(NumericError) as info:
        drive(res, np.full((400, 1), 1e300))
    assert info.value.step is not None


def test_esp_checks():
    diag = Reservoir.from_matrices(np.diag([0.5, 0.3]), np.ones((2, 1)))
    rep = check_esp(diag)
    assert rep.sufficient and rep.practical and rep.gamma == pytest.approx(0.5)
    rep = check_esp(Reservoir.from_matrices(np.diag([1.2, 0.1]), np.ones((2, 1))))
    assert not rep.sufficient and not rep.practical


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 1.5))
def test_sufficient_implies_practical(seed, rho):
    rep = check_esp(build_reservoir(ReservoirConfig(n_r=7, n_v=1, spectral_radius=rho, seed=seed)))
    assert not rep.sufficient or rep.practical


def test_memory_horizon_values():
    assert memory_horizon(0.5, 1.0, 0.01).tau_eps == pytest.approx(math.log(0.01) / math.log(0.5))
    assert memory_horizon(0.5, 1.0, 0.01).tau_eps == pytest.approx(6.6439, abs=1e-4)
    assert memory_horizon(math.exp(-1), 1.0, math.exp(-1)).tau_eps == pytest.approx(1.0)
    assert memory_horizon(1.0, 1.0).unbounded
    assert memory_horizon(0.5, 0.005, 0.01).tau_eps == 0.0
    with pytest.raises(DomainError):
        memory_horizon(0.0, 1.0)
    with pytest.raises(DomainError):
        memory_horizon(0.5, 1.0, 0.0)


def test_linear_sensitivity_profile():
    profile = sensitivity_profile(scalar_linear(), np.ones((10, 1)), 4)
    np.testing.assert_allclose(profile, [1, 0.5, 0.25, 0.125, 0.0625])


def _fd_jacobian(res, v, tau, h=1e-6):
    k = v.shape[0] - 1
    cols = []
    for j in range(v.shape[1]):
        plus, minus = v.copy(), v.copy()
        plus[k - tau, j] += h
        minus[k - tau, j] -= h
        cols.append((drive(res, plus)[-1] - drive(res, minus)[-1]) / (2 * h))
    return np.column_stack(cols)


def test_jacobians_match_finite_differences():
    res = build_reservoir(ReservoirConfig(n_r=10, n_v=2, spectral_radius=0.9, input_scaling=1.0, seed=5))
    v = np.random.default_rng(1).uniform(-1, 1, size=(40, 2))
    for tau, J in enumerate(input_jacobians(res, v, 8)):
        np.testing.assert_allclose(J, _fd_jacobian(res, v, tau), rtol=1e-5, atol=1e-9)


def test_forgetting_envelope_identity_bound():
    # identity activation: state norm bounded by the geometric input sum
    W = np.diag([0.6, -0.4])
    res = Reservoir.from_matrices(W, [[1.0], [0.5]], activation="identity")
    v = np.random.default_rng(3).uniform(-1, 1, size=(60, 1))
    r0 = np.array([5.0, -5.0])
    states = drive(res, v, r0=r0)
    gamma = 0.6
    b = np.linalg.norm(res.W_in, 2) * np.abs(v).max()
    k = np.arange(1, 61)
    assert np.all(np.linalg.norm(states, axis=1) <= gamma ** k * np.linalg.norm(r0) + b / (1 - gamma) + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_tanh_states_stay_in_unit_box(seed):
    res = build_reservoir(ReservoirConfig(n_r=9, n_v=2, spectral_radius=1.3, seed=seed))
    states = drive(res, np.random.default_rng(seed).normal(scale=5, size=(50, 2)))
    # tanh saturates to exactly 1.0 in double precision for large drive
    assert np.all(np.abs(states) <= 1)
    assert np.all(np.linalg.norm(states, axis=1) <= math.sqrt(9))


def test_serialization_round_trip():
    res = build_reservoir(ReservoirConfig(n_r=5, n_v=2, seed=9))
    back = Reservoir.from_dict(res.to_dict())
    np.testing.assert_array_equal(back.W_res, res.W_res)
    np.testing.assert_array_equal(back.W_in, res.W_in)
    assert back.config == res.config


def test_rescaled_keeps_shape_of_weights():
    res = build_reservoir(ReservoirConfig(n_r=6, n_v=1, spectral_radius=0.5, seed=1))
    big = res.rescaled(1.5)
    assert big.actual_spectral_radius == pytest.approx(1.5, rel=1e-9)
    np.testing.assert_allclose(big.W_res, res.W_res * 3)
    np.testing.assert_array_equal(big.W_in, res.W_in)
