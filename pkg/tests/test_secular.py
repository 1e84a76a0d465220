import numpy as np
import pytest

from duodecay.model import ModelParams
from duodecay.secular import (
    bound_state_overlaps,
    continua,
    gaps,
    inertia,
    lattice_bound_states_2exc,
    secular_matrix,
    solve_secular,
    two_excitation_bound_states,
)


def test_frozen_roots():
    bs = two_excitation_bound_states(ModelParams(g=1.0, delta=0.0))
    assert len(bs) == 2
    assert bs[0][0] == pytest.approx(-4.275897435847547, abs=1e-8)
    assert bs[1][0] == pytest.approx(4.275897435847549, abs=1e-8)


def test_no_roots_without_coupling():
    assert solve_secular(ModelParams(g=0.0), 1).roots == []


def test_secular_matrix_is_hermitian_and_monotone():
    p = ModelParams(g=0.9, delta=0.3)
    E0, E1 = 5.0, 5.5
    M0, M1 = secular_matrix(p, E0, 32), secular_matrix(p, E1, 32)
    assert np.abs(M0 - M0.conj().T).max() < 1e-13
    # M(E1) - M(E0) is positive definite outside the continua
    assert np.linalg.eigvalsh(M1 - M0).min() > 0
    n0, _ = inertia(p, E0, 32, 1)
    n1, _ = inertia(p, E1, 32, 1)
    assert n1 <= n0


def test_gaps_exclude_continua():
    p = ModelParams(g=1.2, delta=0.4)
    for a, b in gaps(p):
        for lo, hi in continua(p):
            assert b <= lo or a >= hi


@pytest.mark.parametrize("g, D", [(1.0, 0.0), (1.5, -0.5), (2.0, 1.0)])
def test_roots_match_lattice(g, D):
    p = ModelParams(g=g, delta=D)
    mine = two_excitation_bound_states(p)
    ref = [(e, s) for e, s, w in lattice_bound_states_2exc(p, L=80) if w > 1e-8]
    assert len(mine) == len(ref)
    for (e1, s1), (e2, s2) in zip(mine, ref):
        assert s1 == s2 and abs(e1 - e2) < 1e-5


def test_overlaps_match_lattice_eigenvectors():
    import scipy.sparse.linalg as spla

    from duodecay.model import build_basis, hamiltonian

    p = ModelParams(g=1.0, delta=0.0, L=80)
    H = hamiltonian(p, 2).astype(float).tocsc()
    b = build_basis(p, 2)
    vals, vecs = spla.eigsh(H, k=1, which="LA", tol=1e-14)
    v = vecs[:, 0]
    ov = max(bound_state_overlaps(p), key=lambda o: o.energy)
    assert ov.energy == pytest.approx(vals[0], abs=1e-6)
    assert abs(ov.ee) == pytest.approx(abs(v[0]), abs=1e-6)
    ep = v[b.emitter_photon(1, p.x1)] + v[b.emitter_photon(1, p.x2)]
    # same global phase as <ee|B>
    ep *= np.sign(v[0])
    assert ov.emitter_photon[1] == pytest.approx(ep, abs=1e-6)


def test_rejects_unvalidated_spacing():
    with pytest.raises(NotImplementedError):
        solve_secular(ModelParams(L=40, x1=18, x2=21), 1)
