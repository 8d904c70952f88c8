import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rckoopman.diagnostics import (
    DEFAULT_RHOS,
    autocorrelation,
    conditioning,
    decaying_modes_observable,
    eigenvalue_lifetimes,
    observability_scan,
    select_spectral_radius,
)
from rckoopman.dynamics import DUFFING, generate_trajectory
from rckoopman.errors import DomainError, InputDataError, SelectionError, ShapeError
from rckoopman.lifting import LiftedSnapshots
from rckoopman.reservoir import ReservoirConfig, build_reservoir


def test_orthonormal_rows_condition_one():
    K = 8
    Q = np.linalg.qr(np.random.default_rng(0).normal(size=(K, 3)))[0].T
    rep = conditioning(Q)
    assert rep.kappa == pytest.approx(1.0, rel=1e-12)
    assert rep.alpha == pytest.approx(1 / K, rel=1e-12)
    assert rep.pe_satisfied and rep.bound_holds


def test_repeated_row_fails_excitation():
    row = np.random.default_rng(1).normal(size=50)
    rep = conditioning(np.vstack([row, row, np.ones(50)]))
    assert not rep.pe_satisfied
    assert math.isinf(rep.kappa) and math.isnan(rep.bound)
    assert rep.alpha_status == "<1e-12"
    assert rep.bound_holds is None


def test_conditioning_accepts_snapshots():
    Psi = np.random.default_rng(2).normal(size=(4, 30))
    a = conditioning(LiftedSnapshots(Psi, Psi, np.zeros((0, 30))))
    b = conditioning(Psi)
    assert a.to_dict() == b.to_dict()
    assert a.C_psi == pytest.approx(np.linalg.norm(Psi, axis=0).max())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 6), st.integers(10, 80))
def test_gramian_bounds(seed, n, K):
    Psi = np.random.default_rng(seed).normal(size=(n, K))
    rep = conditioning(Psi)
    assert rep.lambda_max <= rep.C_psi ** 2 * K * (1 + 1e-12)
    if rep.pe_satisfied:
        assert rep.kappa <= rep.bound * (1 + 1e-6)
        assert rep.kappa_numeric == pytest.approx(rep.kappa, rel=1e-6)


def test_lifetimes():
    life = eigenvalue_lifetimes([math.exp(-1), 1.0, 0.9, 0.0, 1.2j])
    assert life[0] == pytest.approx(1.0)
    assert math.isinf(life[1]) and math.isinf(life[4])
    assert life[2] == pytest.approx(9.491, abs=1e-3)
    assert life[3] == 0.0


@settings(max_examples=50)
@given(st.floats(1e-6, 1 - 1e-9), st.floats(1e-6, 1 - 1e-9))
def test_lifetimes_monotone(a, b):
    la, lb = eigenvalue_lifetimes([a, b])
    if a < b:
        assert la <= lb


def test_acf_constant_signal():
    K = 20
    acf = autocorrelation(np.ones((K, 1)), 5)
    np.testing.assert_allclose(acf, [(K - t) / K for t in range(6)], rtol=1e-15)
    assert acf[0] == 1.0


def test_acf_ar1_oracle(ar1_signal):
    acf = autocorrelation(ar1_signal, 10)
    np.testing.assert_allclose(acf, 0.8 ** np.arange(11), atol=0.05)


def test_acf_pools_segments():
    a, b = np.arange(1.0, 6.0)[:, None], np.arange(6.0, 9.0)[:, None]
    num = float(a[:-1, 0] @ a[1:, 0] + b[:-1, 0] @ b[1:, 0])
    den = float(a[:, 0] @ a[:, 0] + b[:, 0] @ b[:, 0])
    assert autocorrelation([a, b], 1)[1] == pytest.approx(num / den)


def test_acf_errors():
    with pytest.raises(InputDataError):
        autocorrelation(np.zeros((10, 2)), 3)
    with pytest.raises(ShapeError):
        autocorrelation(np.ones((5, 1)), 5)


def test_selection_formula():
    y = np.cos(np.arange(200) * 0.3)[:, None]
    sel = select_spectral_radius(y, 50)
    assert sel.acf[sel.tau_c] <= math.exp(-1) < sel.acf[sel.tau_c - 1]
    assert sel.rho == math.exp(-1.0 / sel.tau_c)


def test_selection_unit_lag():
    y = np.array([1.0, -1.0] * 10)[:, None]
    sel = select_spectral_radius(y, 3)
    assert sel.tau_c == 1 and sel.rho == pytest.approx(0.36788, abs=1e-5)


def test_selection_fails_without_decay():
    with pytest.raises(SelectionError):
        select_spectral_radius(np.ones((100, 1)), 10)


def test_selection_demean_rescues_offset():
    y = 5.0 + np.random.default_rng(3).normal(size=(500, 1))
    with pytest.raises(SelectionError):
        select_spectral_radius(y, 20)
    assert select_spectral_radius(y, 20, demean=True).tau_c == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(1e-3, 1e3))
def test_selection_scale_invariant(seed, scale):
    y = np.cumsum(np.random.default_rng(seed).normal(size=(300, 2)), axis=0) * 0.1
    y -= y.mean(axis=0)
    try:
        base = select_spectral_radius(y, 299)
    except SelectionError:
        with pytest.raises(SelectionError):
            select_spectral_radius(y * scale, 299)
        return
    scaled = select_spectral_radius(y * scale, 299)
    assert scaled.tau_c == base.tau_c


@pytest.fixture(scope="module")
def short_duffing():
    return [generate_trajectory(DUFFING, x0, 300) for x0 in ([1.5, -0.3], [-1.2, 0.8])]


def test_scan_determinism_and_fields(short_duffing):
    cfg = ReservoirConfig(n_r=10, n_v=2, seed=3, input_scaling=3.0)
    a, fa = observability_scan(short_duffing, DEFAULT_RHOS, cfg)
    b, fb = observability_scan(short_duffing, DEFAULT_RHOS, cfg)
    assert a == b and not fa and not fb
    assert len(a) == 12 * len(DEFAULT_RHOS)
    for p in a:
        assert p.observable == (p.lifetime <= p.tau_eps)
        assert p.over_extended == (p.rho >= 1)
    taus = {p.rho: p.tau_eps for p in a}
    assert taus[0.1] < taus[0.9]
    assert math.isinf(taus[1.5])


def test_scan_records_failures(short_duffing):
    cfg = ReservoirConfig(n_r=10, n_v=2, seed=3)
    points, failures = observability_scan(short_duffing, [0.5], cfg, washout=400)
    assert not points and failures[0].rho == 0.5 and "ShapeError" in failures[0].error


def test_scan_rejects_bad_radii(short_duffing):
    with pytest.raises(DomainError):
        observability_scan(short_duffing, [], ReservoirConfig(n_r=4, n_v=2))
    with pytest.raises(DomainError):
        observability_scan(short_duffing, [0.0], ReservoirConfig(n_r=4, n_v=2))


def test_scan_uses_given_reservoir(short_duffing):
    res = build_reservoir(ReservoirConfig(n_r=10, n_v=2, seed=8))
    pts, _ = observability_scan(short_duffing, [0.5], base_reservoir=res)
    assert all(p.tau_eps == pytest.approx(math.log(0.01 / res.input_norm) / math.log(0.5)) for p in pts)


def test_decaying_modes_filter():
    from rckoopman.diagnostics import ObservabilityPoint as P

    pts = [P(0.5, 1.44, 0.9, 10.0, True), P(1.0, math.inf, 0.9, 10.0, False, True),
           P(0.9995, 2000.0, 0.9, 10.0, False, True)]
    assert decaying_modes_observable(pts)
    assert not decaying_modes_observable(pts + [P(0.99, 99.5, 0.9, 10.0, False)])
