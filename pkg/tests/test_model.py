import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from duodecay.model import (
    ModelError,
    ModelParams,
    basis_state,
    build_basis,
    centered_sites,
    dispersion,
    ee_state,
    hamiltonian,
    lattice_for,
    light_cone_ok,
    mirror_permutation,
    parity_state,
)

couplings = st.floats(0.0, 2.0)
detunings = st.floats(-2.0, 2.0)
even_L = st.integers(3, 12).map(lambda n: 2 * n)


def test_defaults_place_emitters_at_mirror_centre():
    p = ModelParams(L=10)
    assert (p.x1, p.x2) == (4, 5)
    assert p.spacing == 1 and p.validated_geometry
    assert centered_sites(11) == (5, 6)


@pytest.mark.parametrize(
    "kw, code",
    [
        (dict(J=0.0), "invalid-hopping"),
        (dict(g=-0.1), "invalid-coupling"),
        (dict(delta=float("nan")), "invalid-detuning"),
        (dict(L=2), "invalid-lattice"),
        (dict(L=8, x1=5, x2=5), "invalid-sites"),
        (dict(L=8, x1=0, x2=8), "invalid-sites"),
        (dict(boundary="ring"), "invalid-boundary"),
        (dict(n_excitations=3), "invalid-sector"),
    ],
)
def test_invalid_parameters_raise_with_code(kw, code):
    with pytest.raises(ModelError) as e:
        ModelParams(**kw)
    assert e.value.code == code


def test_replace_recentres_on_new_length():
    p = ModelParams(L=10).replace(L=20)
    assert (p.x1, p.x2) == (9, 10)


def test_digest_tracks_parameters():
    a, b = ModelParams(g=0.3), ModelParams(g=0.3 + 1e-15)
    assert a.digest() == ModelParams(g=0.3).digest()
    assert a.digest() != b.digest()


def test_dispersion_band():
    k = np.linspace(0, np.pi, 5)
    assert np.allclose(dispersion(k, 1.5), -3.0 * np.cos(k))


def test_basis_dimensions_and_labels():
    p = ModelParams(L=6)
    b1, b2 = build_basis(p, 1), build_basis(p, 2)
    assert b1.dim == 8
    assert b2.dim == 1 + 12 + 21
    assert b2.label(0) == "ee"
    assert b2.label(b2.emitter_photon(2, 3)) == "e2,photon@3"
    assert b2.label(b2.pair(4, 1)) == "pair@1,4"
    assert b2.pair(1, 4) == b2.pair(4, 1)


def test_states_are_normalised():
    b = build_basis(ModelParams(L=6), 1)
    assert abs(parity_state(b, -1).norm() - 1) < 1e-15
    with pytest.raises(ValueError):
        type(parity_state(b, 1))(b, np.zeros(3))


@given(couplings, detunings, even_L, st.sampled_from([1, 2]))
def test_hamiltonian_is_real_symmetric(g, D, L, sector):
    H = hamiltonian(ModelParams(g=g, delta=D, L=L), sector)
    assert H.dtype == np.float64
    assert abs(H - H.T).max() == 0.0


@given(couplings, detunings, even_L)
def test_number_of_excitations_is_conserved(g, D, L):
    # the only emitter/photon couplings are |e,j> <-> |ee> and pair <-> |e,j>
    p = ModelParams(g=g, delta=D, L=L)
    H = hamiltonian(p, 2).tocoo()
    b = build_basis(p, 2)
    emitters = np.zeros(b.dim, int)
    emitters[0] = 2
    emitters[1 : 1 + 2 * L] = 1
    assert np.all(np.abs(emitters[H.row] - emitters[H.col]) <= 1)


@given(couplings, detunings, even_L)
def test_mirror_permutation_commutes_with_h(g, D, L):
    p = ModelParams(g=g, delta=D, L=L)
    for sector in (1, 2):
        perm = mirror_permutation(p, sector)
        H = hamiltonian(p, sector)
        P = sp.csr_matrix((np.ones(perm.size), (np.arange(perm.size), perm)))
        assert abs(P @ H - H @ P).max() < 1e-14


def test_mirror_requires_symmetric_chain():
    with pytest.raises(ModelError) as e:
        mirror_permutation(ModelParams(L=9))
    assert e.value.code == "no-mirror"


def test_sector_two_matches_second_quantised_hamiltonian():
    """The pair block against an independent Fock-space construction for L=4."""
    L, g, D, J = 4, 0.7, 0.3, 1.1
    p = ModelParams(J=J, g=g, delta=D, L=L)
    # single-mode operators on the photon chain, truncated at two quanta per site
    nmax = 3
    a = np.diag(np.sqrt(np.arange(1, nmax)), 1)
    Ia = np.eye(nmax)
    sm = np.array([[0, 1], [0, 0]], float)  # lowering, basis (g, e)
    Is = np.eye(2)

    def op(mats):
        out = np.ones((1, 1))
        for m in mats:
            out = np.kron(out, m)
        return out

    def site(j, m):
        return op([Is, Is] + [m if k == j else Ia for k in range(L)])

    def emit(i, m):
        return op([m if k == i else Is for k in range(2)] + [Ia] * L)

    H = np.zeros((4 * nmax**L,) * 2)
    for j in range(L - 1):
        H += -J * (site(j, a).T @ site(j + 1, a) + site(j + 1, a).T @ site(j, a))
    for i, x in enumerate((p.x1, p.x2)):
        s = emit(i, sm)
        H += D * s.T @ s
        H += g * (s.T @ site(x, a) + site(x, a).T @ s)
    # project onto states with two excitations and compare spectra
    n_tot = sum(emit(i, sm).T @ emit(i, sm) for i in range(2)) + sum(
        site(j, a).T @ site(j, a) for j in range(L)
    )
    keep = np.isclose(np.diag(n_tot), 2.0)
    ref = np.linalg.eigvalsh(H[np.ix_(keep, keep)])
    mine = np.linalg.eigvalsh(hamiltonian(p, 2).toarray())
    assert np.allclose(np.sort(ref), np.sort(mine), atol=1e-12)


def test_free_photon_band_without_coupling():
    p = ModelParams(g=0.0, delta=0.4, L=8)
    w = np.linalg.eigvalsh(hamiltonian(p, 1).toarray())
    ref = np.sort(np.concatenate([[0.4, 0.4], -2 * np.cos(np.pi * np.arange(1, 9) / 9)]))
    assert np.allclose(w, ref, atol=1e-13)


def test_light_cone_helpers():
    L = lattice_for(20.0)
    assert L % 2 == 0
    assert light_cone_ok(ModelParams(L=L), 20.0)
    assert not light_cone_ok(ModelParams(L=L - 4), 20.0)


def test_basis_state_index():
    b = build_basis(ModelParams(L=5), 2)
    s = basis_state(b, 3)
    assert s.amplitudes[3] == 1 and s.norm() == 1.0
    assert ee_state(b).amplitudes[0] == 1
