import numpy as np
import pytest
from hypothesis import given, strategies as st

from duodecay.asymptotics import (
    CLASSES,
    TailFitError,
    aicc,
    _log_weights_nb,
    _log_weights_np,
    _parity_chain,
    burst_times,
    chain_spectrum,
    classify_decay,
    fit_tail,
    is_oscillating,
    peaks,
)
from duodecay.model import ModelParams, build_basis, lattice_for, parity_state
from duodecay.propagate import TimeGrid, evolve_krylov
from duodecay.single import continuum_amplitude

from synthetic import MIXED_TOLERANCE, TOLERANCE, draw


def test_exponential_example():
    t = np.linspace(5, 50, 400)
    f = fit_tail(t, np.exp(-t))
    assert f.cls == "exponential"
    assert f.rate == pytest.approx(1.0, rel=0.01)


def test_algebraic_example():
    t = np.geomspace(10, 1000, 300)
    f = fit_tail(t, t**-3.0)
    assert f.cls == "algebraic" and not f.fractional
    assert f.exponent == pytest.approx(-3.0, rel=0.01)


def test_mixed_example():
    t = np.linspace(0.5, 40, 400)
    f = fit_tail(t, np.exp(-t / 2) / t)
    assert f.cls == "mixed"
    assert f.exponent == pytest.approx(-1.0, rel=0.02)
    assert f.rate == pytest.approx(0.5, rel=0.02)


def test_log_corrected_example():
    t = np.geomspace(10, 1e4, 300)
    f = fit_tail(t, t**-3.0 * np.log(t) ** 2)
    assert f.cls == "algebraic-log" and f.log_flag
    assert f.log_power == pytest.approx(2.0, rel=0.05)


def test_fractional_exponent_is_flagged():
    t = np.geomspace(10, 1000, 300)
    assert fit_tail(t, t**-1.5).fractional


@pytest.mark.parametrize("cls", CLASSES)
def test_synthetic_suite(cls):
    for seed in range(20):
        t, y, truth = draw(cls, seed)
        f = fit_tail(t, y)
        assert f.cls == cls, (seed, f.params)
        for k, v in truth.items():
            tol = MIXED_TOLERANCE if cls == "mixed" else TOLERANCE[k]
            assert abs(f.params[k] / v - 1) <= tol, (seed, k)


def test_oscillating_series_uses_peaks():
    t = np.linspace(10, 1000, 20000)
    y = t**-3.0 * (1.5 + np.cos(3 * t))
    assert is_oscillating(t, y)
    tp, yp = peaks(t, y)
    late = tp > 100
    assert np.allclose((yp * tp**3)[late], 2.5, rtol=1e-3)
    f = fit_tail(t, y)
    assert f.cls == "algebraic" and f.exponent == pytest.approx(-3.0, rel=1e-3)


@pytest.mark.parametrize(
    "t, y, code",
    [
        (np.linspace(1, 2, 5), np.ones(5), "window-too-short"),
        (np.linspace(10, 20, 50), np.linspace(1, 2, 50), "window-too-short"),
        (np.linspace(1, 300, 300), -np.ones(300), "non-positive"),
        (np.linspace(1, 300, 300), np.full(300, 2.0), "no-decay"),
    ],
)
def test_fit_errors(t, y, code):
    with pytest.raises(TailFitError) as e:
        fit_tail(t, y)
    assert e.value.code == code


@given(st.floats(-4, -0.5), st.floats(-20, 20))
def test_scale_invariance(p, logc):
    t = np.geomspace(10, 1000, 200)
    a = fit_tail(t, t**p)
    b = fit_tail(t, np.exp(logc) * t**p)
    assert a.cls == b.cls == "algebraic"
    assert abs(a.exponent - b.exponent) < 1e-9


@given(st.floats(0.05, 2.0), st.floats(0.2, 5.0))
def test_time_rescaling_of_rates(G, s):
    t = np.linspace(1 / G, 10 / G, 300)
    a = fit_tail(t, np.exp(-G * t))
    b = fit_tail(t / s, np.exp(-G * t))
    assert a.cls == b.cls == "exponential"
    assert b.rate == pytest.approx(s * a.rate, rel=1e-9)


def test_aicc_floor_and_penalty():
    assert aicc(0.0, 100, 2, 1e-3) == aicc(1e-9, 100, 2, 1e-3)
    assert aicc(1.0, 100, 3, 1e-3) > aicc(1.0, 100, 2, 1e-3)


def test_burst_times_are_sorted_bursts():
    t = burst_times(100, 1000, centers=10, per_burst=5)
    assert t.size == 50 and np.all(np.diff(t) > 0)
    assert t[0] == pytest.approx(100) and t[-1] < 1000


def test_no_decay_without_coupling():
    f = classify_decay(ModelParams(g=0.0), "P_ee", (10.0, 100.0))
    assert f.verdict == "no-decay" and f.cls == "none"


def test_single_excitation_tail_is_algebraic():
    p = ModelParams(g=1.0)
    f = classify_decay(p, "single-continuum", (300.0, 3000.0), sigma=1)
    assert f.cls == "algebraic"
    assert f.exponent == pytest.approx(-3.0, rel=0.01)
    assert f.provenance["producer"] == "analytic"


def test_unknown_observable():
    with pytest.raises(ValueError):
        classify_decay(ModelParams(), "photon-number", (1.0, 10.0))
    d = fit_tail(np.geomspace(10, 1000, 300), np.geomspace(10, 1000, 300) ** -2.0).to_dict()
    assert d["class"] == "algebraic" and set(d["scores"]) == set(CLASSES)


@pytest.mark.parametrize("sigma", [1, -1])
def test_chain_weights_match_dense_eigenvectors(sigma):
    p = ModelParams(g=0.7, delta=-0.4)
    d, e = _parity_chain(p, sigma, 40)
    lam, w = chain_spectrum(d, e)
    ref_l, ref_v = np.linalg.eigh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    assert np.abs(lam - ref_l).max() < 1e-13
    assert np.abs(w - ref_v[0] ** 2).max() < 1e-13


def test_log_weight_kernels_agree():
    d, e = _parity_chain(ModelParams(g=0.4, delta=0.1), 1, 300)
    from scipy.linalg import eigh_tridiagonal

    lam = eigh_tridiagonal(d, e, eigvals_only=True)
    mu = eigh_tridiagonal(d[1:], e[1:], eigvals_only=True)
    assert np.abs(_log_weights_nb(lam, mu) - _log_weights_np(lam, mu)).max() < 1e-10


@pytest.mark.parametrize("sigma", [1, -1])
def test_spectral_chain_reproduces_lattice_propagation(sigma):
    p = ModelParams(g=0.5, delta=0.2, L=lattice_for(10.0), n_excitations=1)
    lam, w = chain_spectrum(*_parity_chain(p, sigma, p.L))
    t = np.linspace(0, 10, 11)
    amp = np.exp(-1j * np.outer(t, lam)) @ w
    tr = evolve_krylov(parity_state(build_basis(p, 1), sigma), p, TimeGrid(10.0, 11), tol=1e-12)
    assert np.abs(amp - tr.observables.C_sigma(sigma)).max() < 1e-12


def test_oracle_producer_matches_cut_integral():
    p = ModelParams(g=1.0)
    t = burst_times(200.0, 600.0, centers=6, per_burst=4)
    ana = np.abs(continuum_amplitude(t, 1, p)) ** 2
    f = classify_decay(p, "single-continuum", (200.0, 600.0), producer="oracle", sigma=1)
    assert f.provenance["method"] == "lattice-spectral"
    from duodecay.asymptotics import single_continuum_series

    y, _ = single_continuum_series(p, 1, t, producer="oracle")
    assert np.abs(y / ana - 1).max() < 1e-5
