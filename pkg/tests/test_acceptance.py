"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line in ``RESULTS``; ``conftest.py`` prints
them in the terminal summary.  Tolerances are the ones the criteria state.
"""
import os
import time

import numpy as np
import pytest

from duodecay.asymptotics import CLASSES, classify_decay, fit_tail
from duodecay.cli import COMMANDS, main
from duodecay.greens import phi_dual
from duodecay.markov import markov_populations, markov_rates
from duodecay.model import ModelParams, build_basis, ee_state, lattice_for, parity_state
from duodecay.propagate import Absorber, TimeGrid, evolve_dense, evolve_krylov
from duodecay.secular import lattice_bound_states_2exc, two_excitation_bound_states
from duodecay.single import (
    emitter_amplitude_1exc,
    find_bound_states_1exc,
    lattice_bound_states_1exc,
    sum_rule,
)
from duodecay.twoexc import (
    soft_symmetry_check,
    solve_two_excitation,
    verify_phi_csigma_connection,
)

from synthetic import MIXED_TOLERANCE, TOLERANCE, draw

RESULTS = {}
pytestmark = pytest.mark.slow


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


def test_criterion_1_dense_vs_krylov():
    p = ModelParams(g=0.7, delta=0.3, L=11)
    psi = ee_state(build_basis(p, 2))
    grid = TimeGrid(20.0, 201)
    t0 = time.perf_counter()
    a = evolve_dense(psi, p, grid)
    b = evolve_krylov(psi, p, grid, tol=1e-11)
    dt = time.perf_counter() - t0
    dev = float(np.abs(a.states - b.states).max())
    record(1, dev < 1e-8 and dt < 10, f"max amplitude deviation {dev:.2e} (< 1e-8), runtime {dt:.1f} s (< 10 s)")


def test_criterion_2_unitarity_and_energy():
    p = ModelParams(g=0.5, delta=0.3, L=401)
    t0 = time.perf_counter()
    tr = evolve_krylov(ee_state(build_basis(p, 2)), p, TimeGrid(80.0, 81), tol=1e-10, keep_states=False)
    dt = time.perf_counter() - t0
    o = tr.observables
    nd = float(np.abs(o.norm - 1).max())
    ed = float(np.abs(o.energy - o.energy[0]).max() / abs(o.energy[0]))
    record(2, nd < 1e-9 and ed < 1e-8 and dt < 300,
           f"norm drift {nd:.2e} (< 1e-9), relative energy drift {ed:.2e} (< 1e-8), runtime {dt:.0f} s (< 300 s)")


def test_criterion_3_single_excitation_exactness():
    T = 30.0
    worst, worst_rule = 0.0, 0.0
    for g in (0.1, 0.5, 1.5):
        p = ModelParams(g=g, delta=0.0, L=lattice_for(T), n_excitations=1)
        grid = TimeGrid(T, 151)
        for s in (1, -1):
            tr = evolve_krylov(parity_state(build_basis(p, 1), s), p, grid, tol=1e-12)
            assert tr.metadata["light_cone_ok"]
            ana = emitter_amplitude_1exc(grid.times, s, p)
            worst = max(worst, float(np.abs(ana - tr.observables.C_sigma(s)).max()))
            worst_rule = max(worst_rule, abs(sum_rule(s, p) - 1))
    record(3, worst < 1e-5 and worst_rule < 1e-8,
           f"sup-norm vs oracle {worst:.2e} (< 1e-5), sum-rule defect {worst_rule:.2e} (< 1e-8)")


def _match(analytic, lattice, tol):
    """Bijection check: same count, same parities, energies within tol."""
    if len(analytic) != len(lattice):
        return False, np.inf
    err = 0.0
    for (e1, s1), (e2, s2) in zip(sorted(analytic), sorted(lattice)):
        if s1 != s2:
            return False, np.inf
        err = max(err, abs(e1 - e2))
    return err < tol, err


def test_criterion_4_bound_state_bijection():
    gs = (0.5, 0.8, 1.2, 1.6, 2.0)
    ds = (-1.0, -0.5, 0.0, 0.5, 1.0)
    bad = []
    e1_max = e2_max = 0.0
    for g in gs:
        for D in ds:
            p = ModelParams(g=g, delta=D)
            an1 = [(b.energy, b.sigma) for b in find_bound_states_1exc(p)]
            la1 = [(e, s) for e, s, _ in lattice_bound_states_1exc(p, L=2002)]
            ok1, e1 = _match(an1, la1, 1e-6)
            an2 = two_excitation_bound_states(p)
            la2 = [(e, s) for e, s, _ in lattice_bound_states_2exc(p, L=122)]
            ok2, e2 = _match(an2, la2, 1e-5)
            e1_max, e2_max = max(e1_max, e1), max(e2_max, e2)
            if not (ok1 and ok2):
                bad.append((g, D, len(an1), len(la1), len(an2), len(la2)))
    record(4, not bad, f"5x5 grid, max energy error 1-exc {e1_max:.1e} (< 1e-6), 2-exc {e2_max:.1e} (< 1e-5), "
                       f"mismatched points {bad}")


def test_criterion_5_two_excitation_layer():
    T = 20.0
    grid = TimeGrid(T, 101)
    worst_c = worst_rec = 0.0
    for g in (0.1, 0.5, 1.5):
        p = ModelParams(g=g, delta=0.3, L=lattice_for(T))
        tr = evolve_krylov(ee_state(build_basis(p, 2)), p, grid, tol=1e-11)
        assert tr.metadata["light_cone_ok"]
        ta = solve_two_excitation(p, grid, levels=4)
        o = tr.observables
        worst_c = max(worst_c, float(np.abs(ta.C_ee - o.C_ee).max()),
                      float(np.abs(ta.C_sigma[1] - o.C_plus).max()),
                      float(np.abs(ta.C_sigma[-1] - o.C_minus).max()))
        idx = np.arange(0, grid.n_samples, 20)
        rec = ta.reconstruct(p, indices=idx)
        worst_rec = max(worst_rec, float(np.abs(rec - tr.states[idx]).max()))
    rng = np.random.default_rng(5)
    n_phi, worst_phi = 0, 0.0
    for _ in range(120):
        z = complex(rng.uniform(-6, 6), rng.uniform(0.05, 4))
        ev = phi_dual(z, int(rng.choice([1, -1])), int(rng.integers(1, 4)))
        worst_phi = max(worst_phi, ev.error)
        n_phi += 1
    worst_id = 0.0
    for g, D in ((0.3, 0.0), (1.5, 0.5)):
        for s in (1, -1):
            rep = verify_phi_csigma_connection(ModelParams(g=g, delta=D), s, TimeGrid(40.0, 201), levels=4)
            worst_id = max(worst_id, rep["max_residual"])
    ok = worst_c < 1e-4 and worst_rec < 1e-4 and worst_phi < 1e-8 and worst_id < 1e-6
    record(5, ok, f"amplitudes {worst_c:.1e}, reconstruction {worst_rec:.1e} (< 1e-4); "
                  f"Phi dual paths {worst_phi:.1e} on {n_phi} tuples (< 1e-8); identity {worst_id:.1e} (< 1e-6)")


def test_criterion_6_symmetries():
    p = ModelParams(g=0.8, delta=0.3, L=62)
    tr = evolve_krylov(ee_state(build_basis(p, 2)), p, TimeGrid(60.0, 121), tol=1e-11)
    hard = soft_symmetry_check(tr)
    q = ModelParams(g=0.1, delta=0.2, L=lattice_for(40.0))
    tr2 = evolve_krylov(ee_state(build_basis(q, 2)), q, TimeGrid(40.0, 81), tol=1e-11, keep_states=False)
    soft = soft_symmetry_check(tr2)
    ok = hard["antisymmetric_leakage"] < 1e-10 and soft["soft_pass"]
    record(6, ok, f"antisymmetric leakage {hard['antisymmetric_leakage']:.1e} (< 1e-10); soft residual "
                  f"{soft['soft_residual_max']:.2e} against the linear bound 2 sqrt(2) |delta| t "
                  f"(max excess {soft['soft_excess']:.2e})")


def _markov_deviation(g):
    p = ModelParams(g=g, delta=0.0, L=202)
    m = markov_rates(p)
    grid = TimeGrid(5.0 / m.gamma, 101)
    tr = evolve_krylov(ee_state(build_basis(p, 2)), p, grid, tol=1e-10, keep_states=False, m_max=30,
                       absorber=Absorber(60, 0.3))
    return float(np.abs(tr.observables.P_ee - markov_populations(m, grid.times).P_ee).max())


def test_criterion_7_markov_limit():
    devs = {g: _markov_deviation(g) for g in (0.2, 0.1, 0.05)}
    mono = devs[0.2] > devs[0.1] > devs[0.05]
    record(7, devs[0.05] < 0.02 and mono,
           "max |P_ee - cascade| over Gamma t in [0, 5]: "
           + ", ".join(f"g={g}: {d:.1e}" for g, d in devs.items()) + " (g=0.05 < 0.02, decreasing)")


def test_criterion_8_decay_classifier():
    misses = 0
    for cls in CLASSES:
        for seed in range(20):
            t, y, truth = draw(cls, seed)
            f = fit_tail(t, y)
            good = f.cls == cls and all(
                abs(f.params[k] / v - 1) <= (MIXED_TOLERANCE if cls == "mixed" else TOLERANCE[k])
                for k, v in truth.items()
            )
            misses += not good
    p = ModelParams(g=0.3, delta=0.0)
    window = (3000.0, 30000.0)
    a = classify_decay(p, "single-continuum", window, producer="analytic", sigma=1)
    o = classify_decay(p, "single-continuum", window, producer="oracle", sigma=1)
    single_ok = a.cls == o.cls and abs(a.exponent / o.exponent - 1) < 0.05
    # two-excitation tails: the class labels must be checked against a reference regime map.
    # None is available to this implementation (see the decision ledger), so this part
    # cannot pass; the classifier output is still produced and reported.
    reference_map = None
    labels = {}
    for obs in ("C_ee-continuum", "C_plus-continuum", "P_ee"):
        f = classify_decay(ModelParams(g=0.5, delta=0.0), obs, (50.0, 200.0))
        labels[obs] = f.cls
    two_ok = reference_map is not None
    record(8, misses == 0 and single_ok and two_ok,
           f"synthetic misses {misses}/80; single-excitation analytic {a.cls} p={a.exponent:.4f} vs oracle "
           f"{o.cls} p={o.exponent:.4f}; two-excitation labels at g=0.5, delta=0 {labels}: "
           "no reference regime map to compare against")


def test_criterion_9_reproducibility(tmp_path, capsys):
    here = os.path.dirname(__file__)
    golden = os.path.join(here, "golden")
    mismatched = []
    for cmd in COMMANDS:
        cfg = os.path.join(golden, "configs", f"{cmd}.ini")
        extra = ["--format", "both"] if cmd != "plot" else \
            ["--input", os.path.join(golden, "simulate", "observables.csv")]
        trees = []
        for run in ("a", "b"):
            out = tmp_path / cmd / run
            assert main([cmd, "--config", cfg, "--out", str(out)] + extra) == 0
            trees.append(_tree(out))
        if not (trees[0] == trees[1] == _tree(os.path.join(golden, cmd))):
            mismatched.append(cmd)
        capsys.readouterr()
    record(9, not mismatched, f"{len(COMMANDS)} subcommands rerun byte-identical and equal to golden files; "
                              f"mismatches {mismatched}")


def _tree(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            path = os.path.join(d, f)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out
