"""Two-excitation bound states on the infinite waveguide.

Eliminating the two-photon amplitude leaves an energy-dependent problem for
the |ee> amplitude A and the emitter-photon amplitudes in momentum space,
b_i(q).  On a periodic trapezoid grid q_n = 2 pi n / N it reads M(E) v = 0
with the Hermitian matrix

    M[A, A]             = E - 2 delta
    M[(i,n), (m,n)]    += (E - delta - w_n) delta_im - g^2 G_{x_i - x_m}(E - w_n)
    M[(i,n), (m,n')]   -= g^2/N e^{i q_n' x_i} e^{-i q_n x_m} / (E - w_n - w_n')
    M[(i,n), A]         = -g/sqrt(N) e^{-i q_n x_ibar}

(w_n = -2J cos q_n, ibar the other emitter).  M is the Schur complement of
E - H onto the emitter-bearing configurations, so dM/dE >= 1 away from the
continua: eigenvalues of M increase with E and the number of negative ones
drops by exactly one at each bound state.  Roots are counted by this
inertia and then polished on the crossing eigenvalue.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy import optimize

from .greens import green
from .model import ModelParams, build_basis, hamiltonian, mirror_permutation
from .single import find_bound_states_1exc


@dataclass
class SecularProblem:
    params: ModelParams
    sigma: int
    n_q: int
    roots: list = field(default_factory=list)
    multiplicities: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    intervals: list = field(default_factory=list)

    def secular(self, E):
        """Eigenvalue of the parity-projected M(E) closest to zero."""
        w = np.linalg.eigvalsh(secular_matrix(self.params, E, self.n_q, self.sigma))
        return float(w[np.argmin(np.abs(w))])


def continua(params):
    """Real-energy intervals of the two-excitation continuum."""
    J = params.J
    bands = [(-4 * J, 4 * J)]
    for b in find_bound_states_1exc(params):
        bands.append((b.energy - 2 * J, b.energy + 2 * J))
    bands.sort()
    merged = [list(bands[0])]
    for lo, hi in bands[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(b) for b in merged]


def search_window(params):
    J, g, D = params.J, params.g, params.delta
    half = 2 * (2 * J) + 10 * g + 2 * abs(D)
    return -half + 2 * min(D, 0), half + 2 * max(D, 0)


def gaps(params, pad=1e-6):
    """Search intervals outside the continua, padded by ``pad * J``."""
    lo, hi = search_window(params)
    pad = pad * params.J
    out = []
    cur = lo
    for a, b in continua(params):
        if a - pad > cur:
            out.append((cur, a - pad))
        cur = max(cur, b + pad)
    if hi > cur:
        out.append((cur, hi))
    return out


def _mirror_isometry(N, s, sector):
    """Columns spanning the mirror-parity ``sector`` of (A, b_1, b_2)."""
    q = 2 * np.pi * np.arange(N) / N
    dim = 1 + 2 * N
    cols = []
    Q = np.zeros((dim, N + (1 if sector > 0 else 0)), complex)
    n = np.arange(N)
    minus = (-n) % N
    Q[1 + n, n] = 1 / np.sqrt(2)
    Q[1 + N + minus, n] = sector * np.exp(1j * q * s) / np.sqrt(2)
    if sector > 0:
        Q[0, N] = 1.0
    del cols
    return Q


def secular_matrix(params, E, N, sector=None):
    """M(E) on an N-point momentum grid; ``sector`` projects onto a mirror parity."""
    J, g, D = params.J, params.g, params.delta
    d = params.spacing
    xs = np.array([0, d])
    q = 2 * np.pi * np.arange(N) / N
    w = -2 * J * np.cos(q)
    z = E - w
    G0 = green(z + 0j, 0, J).real
    Gd = green(z + 0j, d, J).real
    M = np.zeros((1 + 2 * N, 1 + 2 * N), complex)
    M[0, 0] = E - 2 * D
    idx = [1 + np.arange(N), 1 + N + np.arange(N)]
    for i in range(2):
        for m in range(2):
            diag = -g * g * (G0 if i == m else Gd)
            if i == m:
                diag = diag + (E - D - w)
            M[idx[i], idx[m]] += diag
    den = 1.0 / (E - w[:, None] - w[None, :])  # [n, n']
    for i in range(2):
        for m in range(2):
            ph = np.exp(-1j * q[:, None] * xs[m]) * np.exp(1j * q[None, :] * xs[i])
            M[np.ix_(idx[i], idx[m])] -= g * g / N * ph * den
    for i in range(2):
        other = xs[1 - i]
        col = -g / np.sqrt(N) * np.exp(-1j * q * other)
        M[idx[i], 0] = col
        M[0, idx[i]] = col.conj()
    if sector is None:
        return M
    Q = _mirror_isometry(N, xs[0] + xs[1], sector)
    return Q.conj().T @ M @ Q


def inertia(params, E, N, sector):
    w = np.linalg.eigvalsh(secular_matrix(params, E, N, sector))
    return int(np.sum(w < 0)), w


def _roots_in(params, a, b, N, sector, xtol):
    na, _ = inertia(params, a, N, sector)
    nb, _ = inertia(params, b, N, sector)
    if na < nb:
        raise RuntimeError("inertia increased across an interval; M(E) is not monotone here")
    found = []
    stack = [(a, b, na, nb)]
    while stack:
        lo, hi, nlo, nhi = stack.pop()
        if nlo == nhi:
            continue
        if nlo - nhi == 1:
            k = nlo - 1  # index of the eigenvalue that crosses zero

            def f(E):
                return np.linalg.eigvalsh(secular_matrix(params, E, N, sector))[k]

            E = optimize.brentq(f, lo, hi, xtol=xtol, rtol=1e-15, maxiter=200)
            found.append((E, 1, abs(f(E))))
            continue
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-11 * params.J:
            found.append((mid, nlo - nhi, 0.0))
            continue
        nm, _ = inertia(params, mid, N, sector)
        stack.append((lo, mid, nlo, nm))
        stack.append((mid, hi, nm, nhi))
    return found


def solve_secular(params, sigma, n_q=None, pad=1e-6, xtol=1e-13, tol=1e-10, max_nq=2048):
    """Bound-state energies in mirror parity ``sigma`` (+1 contains |ee>).

    The grid is doubled from ``n_q`` (default 64) until the root set is
    stable to ``tol``.
    """
    if params.spacing != 1:
        raise NotImplementedError("validated for adjacent emitters only")
    prob = SecularProblem(params, sigma, 0)
    if params.g == 0:
        return prob
    prob.intervals = gaps(params, pad)
    N = 64 if n_q is None else n_q
    prev = None
    while True:
        roots = []
        for a, b in prob.intervals:
            roots.extend(_roots_in(params, a, b, N, sigma, xtol))
        roots.sort()
        Es = np.array([r[0] for r in roots])
        if prev is not None and len(prev) == len(Es) and (Es.size == 0 or np.max(np.abs(prev - Es)) < tol):
            break
        if N >= max_nq or n_q is not None:
            break
        prev = Es
        N *= 2
    prob.n_q = N
    merged = []
    for E, mult, res in roots:
        if merged and abs(E - merged[-1][0]) < 1e-9 * params.J:
            merged[-1][1] += mult
            continue
        merged.append([E, mult, res])
    prob.roots = [float(m[0]) for m in merged]
    prob.multiplicities = [int(m[1]) for m in merged]
    prob.residuals = [float(m[2]) for m in merged]
    return prob


def two_excitation_bound_states(params, **kw):
    """Both mirror parities: list of (energy, parity)."""
    out = []
    for s in (1, -1):
        p = solve_secular(params, s, **kw)
        out.extend((E, s) for E in p.roots)
    return sorted(out)


# --- lattice oracle --------------------------------------------------------

def lattice_bound_states_2exc(params, L=122, pad=1e-6, k0=8):
    """Eigenvalues of the finite sector-2 lattice outside the continua.

    Returns (energy, parity, emitter weight) with the emitter weight being
    the probability of at least one excited emitter.
    """
    p = ModelParams(J=params.J, g=params.g, delta=params.delta, L=L, n_excitations=2)
    H = hamiltonian(p, 2).astype(float).tocsc()
    basis = build_basis(p, 2)
    perm = mirror_permutation(p, 2)
    ne = 1 + 2 * L
    bands = continua(params)
    top, bottom = bands[-1][1], bands[0][0]
    found = {}

    def keep(vals, vecs):
        for e, v in zip(vals, vecs.T):
            if any(a - pad <= e <= b + pad for a, b in bands):
                continue
            found[round(float(e), 9)] = (float(e), v)

    for which, edge in (("LA", top), ("SA", bottom)):
        k = k0
        while True:
            vals, vecs = spla.eigsh(H, k=k, which=which, tol=1e-13, ncv=max(2 * k + 1, 40))
            keep(vals, vecs)
            inside = vals.min() <= edge if which == "LA" else vals.max() >= edge
            if inside or k >= basis.dim - 2:
                break
            k *= 2
    for (a0, b0), (a1, b1) in zip(bands[:-1], bands[1:]):
        lo, hi = b0, a1
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        k = k0
        while True:
            vals, vecs = spla.eigsh(H, k=k, sigma=mid, which="LM", tol=1e-13)
            keep(vals, vecs)
            if np.max(np.abs(vals - mid)) > half or k >= basis.dim - 2:
                break
            k *= 2
    out = []
    for e, v in sorted(found.values()):
        wt = float(np.sum(v[:ne] ** 2))
        par = 1 if np.abs(v - v[perm]).max() < np.abs(v + v[perm]).max() else -1
        out.append((e, par, wt))
    return out


@dataclass
class BoundStateOverlap:
    energy: float
    parity: int
    ee: complex          # <ee|B>
    emitter_photon: dict  # sigma -> <C_sigma configuration|B>, C_s = C_1(x1) + s C_1(x2)


def bound_state_overlaps(params, n_q=None, dE=1e-6, **kw):
    """Normalised overlaps of the parity-even bound states with |ee> and C_s.

    For a null vector x of M(E) the full eigenstate has norm x^H M'(E) x,
    since M is the Schur complement of E - H.
    """
    prob = solve_secular(params, 1, n_q=n_q, **kw)
    N = prob.n_q
    d = params.spacing
    q = 2 * np.pi * np.arange(N) / N
    Q = _mirror_isometry(N, d, 1)
    out = []
    for E in prob.roots:
        Mp = secular_matrix(params, E, N, 1)
        w, V = np.linalg.eigh(Mp)
        y = V[:, np.argmin(np.abs(w))]
        x = Q @ y
        dM = (secular_matrix(params, E + dE, N) - secular_matrix(params, E - dE, N)) / (2 * dE)
        nrm = float(np.real(x.conj() @ dM @ x))
        x = x / np.sqrt(nrm)
        A = x[0]
        b1, b2 = x[1:1 + N], x[1 + N:]
        # C_1(j) = amplitude of (emitter 1 excited, photon at j); emitters sit at 0 and d
        C1 = lambda j: np.sum(np.exp(1j * q * j) * b1) / np.sqrt(N)
        ph = np.conj(A) / abs(A) if abs(A) > 0 else 1.0
        ep = {s: complex(ph * (C1(0) + s * C1(d))) for s in (1, -1)}
        out.append(BoundStateOverlap(float(E), 1, complex(abs(A)), ep))
    return out
