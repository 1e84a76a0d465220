"""Two emitters side-coupled to a tight-binding waveguide.

Energies are measured from the band centre, so a photon at wavenumber k has
energy -2J cos k and an excited emitter carries the detuning ``delta``.  The
emitter-photon coupling is excitation conserving (rotating-wave form) and the
emitters are two-level systems.

Sector-2 amplitudes are stored in the order

    |ee>,  |e_i, j>  (i = 1, 2; j = 0..L-1),  |j, k>  (j <= k)

where |j, k> with j < k is the normalised symmetric pair a_j^+ a_k^+ |0> and
|j, j> is the normalised two-photon Fock state (a_j^+)^2 / sqrt(2) |0>.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

SQRT2 = np.sqrt(2.0)


class ModelError(ValueError):
    """Invalid model parameters; ``code`` is a short machine-readable tag."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def centered_sites(L, spacing=1):
    """Emitter cells placed symmetrically about the lattice centre.

    For even ``L`` with unit spacing the bond between the emitters is the
    exact mirror centre of the open chain.
    """
    x1 = (L - spacing) // 2
    return x1, x1 + spacing


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings, geometry and truncation."""

    J: float = 1.0
    g: float = 0.3
    delta: float = 0.0
    L: int = 122
    x1: int | None = None
    x2: int | None = None
    boundary: str = "open"
    n_excitations: int = 2

    def __post_init__(self):
        L = int(self.L)
        object.__setattr__(self, "L", L)
        if self.x1 is None or self.x2 is None:
            x1, x2 = centered_sites(L)
            object.__setattr__(self, "x1", x1 if self.x1 is None else int(self.x1))
            object.__setattr__(self, "x2", x1 + 1 if self.x2 is None else int(self.x2))
        object.__setattr__(self, "J", float(self.J))
        object.__setattr__(self, "g", float(self.g))
        object.__setattr__(self, "delta", float(self.delta))
        self.validate()

    def validate(self):
        if not np.isfinite(self.J) or self.J <= 0:
            raise ModelError("invalid-hopping", f"J must be > 0, got {self.J}")
        if not np.isfinite(self.g) or self.g < 0:
            raise ModelError("invalid-coupling", f"g must be >= 0, got {self.g}")
        if not np.isfinite(self.delta):
            raise ModelError("invalid-detuning", "delta must be finite")
        if self.L < 3:
            raise ModelError("invalid-lattice", f"L must be >= 3, got {self.L}")
        if not (0 <= self.x1 < self.x2 <= self.L - 1):
            raise ModelError(
                "invalid-sites",
                f"need 0 <= x1 < x2 <= L-1, got x1={self.x1}, x2={self.x2}, L={self.L}",
            )
        if self.boundary not in ("open", "periodic"):
            raise ModelError("invalid-boundary", f"unknown boundary {self.boundary!r}")
        if self.n_excitations not in (1, 2):
            raise ModelError("invalid-sector", "n_excitations must be 1 or 2")

    @property
    def spacing(self):
        return self.x2 - self.x1

    @property
    def validated_geometry(self):
        """Only adjacent emitters are covered by the test-suite."""
        return self.spacing == 1

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        if "L" in changes and "x1" not in changes:
            d["x1"] = d["x2"] = None
        return ModelParams(**d)

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps({k: repr(v) for k, v in asdict(self).items()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dispersion(k, params_or_J=1.0):
    """Photon energy -2J cos k in the band-centred frame."""
    J = params_or_J.J if isinstance(params_or_J, ModelParams) else float(params_or_J)
    return -2.0 * J * np.cos(k)


@dataclass(frozen=True)
class Basis:
    """Contiguous indexing of one excitation sector."""

    sector: int
    L: int
    x1: int
    x2: int
    pair_index: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def dim(self):
        if self.sector == 1:
            return 2 + self.L
        return 1 + 2 * self.L + self.L * (self.L + 1) // 2

    # sector 1 -----------------------------------------------------------
    def emitter(self, i):
        """Index of |e_i> (sector 1, i = 1 or 2)."""
        assert self.sector == 1
        return i - 1

    def photon(self, j):
        assert self.sector == 1
        return 2 + j

    # sector 2 -----------------------------------------------------------
    ee = 0

    def emitter_photon(self, i, j):
        """Index of |e_i, j> (sector 2)."""
        assert self.sector == 2
        return 1 + (i - 1) * self.L + j

    def pair(self, j, k):
        assert self.sector == 2
        return 1 + 2 * self.L + int(self.pair_index[j, k])

    @property
    def n_pairs(self):
        return self.L * (self.L + 1) // 2

    def pair_sites(self):
        """Arrays (j, k), j <= k, in storage order."""
        return np.triu_indices(self.L)

    def slices(self):
        """Named slices of the amplitude vector."""
        L = self.L
        if self.sector == 1:
            return {"emitters": slice(0, 2), "photon": slice(2, 2 + L)}
        return {
            "ee": slice(0, 1),
            "e1": slice(1, 1 + L),
            "e2": slice(1 + L, 1 + 2 * L),
            "pairs": slice(1 + 2 * L, self.dim),
        }

    def label(self, n):
        """Human-readable configuration for index ``n``."""
        if self.sector == 1:
            return f"e{n + 1}" if n < 2 else f"photon@{n - 2}"
        if n == 0:
            return "ee"
        if n < 1 + 2 * self.L:
            i, j = divmod(n - 1, self.L)
            return f"e{i + 1},photon@{j}"
        jj, kk = self.pair_sites()
        p = n - 1 - 2 * self.L
        return f"pair@{jj[p]},{kk[p]}"


def build_basis(params, sector=None):
    """Basis of the sector ``sector`` (default: ``params.n_excitations``)."""
    if not isinstance(params, ModelParams):
        raise TypeError("params must be ModelParams")
    params.validate()
    sector = params.n_excitations if sector is None else sector
    if sector not in (1, 2):
        raise ModelError("invalid-sector", "sector must be 1 or 2")
    pidx = None
    if sector == 2:
        L = params.L
        jj, kk = np.triu_indices(L)
        pidx = np.full((L, L), -1, dtype=np.int64)
        pidx[jj, kk] = np.arange(jj.size)
        pidx[kk, jj] = np.arange(jj.size)
        pidx.setflags(write=False)
    return Basis(sector, params.L, params.x1, params.x2, pidx)


@dataclass
class QuantumState:
    """Amplitude vector over a basis at time ``t``."""

    basis: Basis
    amplitudes: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError(
                f"amplitude vector has shape {self.amplitudes.shape}, basis dim {self.basis.dim}"
            )

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return QuantumState(self.basis, self.amplitudes.copy(), self.t)


def basis_state(basis, index, t=0.0):
    v = np.zeros(basis.dim, dtype=np.complex128)
    v[index] = 1.0
    return QuantumState(basis, v, t)


def ee_state(basis):
    """Both emitters excited, no photons."""
    return basis_state(basis, basis.ee)


def parity_state(basis, sigma):
    """Sector-1 state (|e1> + sigma |e2>)/sqrt(2)."""
    v = np.zeros(basis.dim, dtype=np.complex128)
    v[0] = 1 / SQRT2
    v[1] = sigma / SQRT2
    return QuantumState(basis, v)


def _photon_hopping(L, J, boundary):
    off = -J * np.ones(L - 1)
    h = sp.diags([off, off], [1, -1], shape=(L, L), format="lil")
    if boundary == "periodic" and L > 2:
        h[0, L - 1] = -J
        h[L - 1, 0] = -J
    return h.tocsr()


def _pair_isometry(L):
    """Map from normalised pair states (j<=k) into the ordered product space."""
    jj, kk = np.triu_indices(L)
    p = np.arange(jj.size)
    diag = jj == kk
    rows = np.concatenate([(jj * L + kk)[diag], (jj * L + kk)[~diag], (kk * L + jj)[~diag]])
    cols = np.concatenate([p[diag], p[~diag], p[~diag]])
    nd = int((~diag).sum())
    vals = np.concatenate([np.ones(int(diag.sum())), np.full(2 * nd, 1 / SQRT2)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(L * L, jj.size))


@lru_cache(maxsize=16)
def hamiltonian(params, sector=None):
    """Sparse (CSR, real symmetric) Hamiltonian of one excitation sector."""
    sector = params.n_excitations if sector is None else sector
    L, J, g, D = params.L, params.J, params.g, params.delta
    xs = (params.x1, params.x2)
    h = _photon_hopping(L, J, params.boundary)
    if sector == 1:
        hc = h.tocoo()
        rows = np.concatenate([[0, 1, 0, 2 + xs[0], 1, 2 + xs[1]], 2 + hc.row])
        cols = np.concatenate([[0, 1, 2 + xs[0], 0, 2 + xs[1], 1], 2 + hc.col])
        vals = np.concatenate([[D, D, g, g, g, g], hc.data])
        H = sp.csr_matrix((vals, (rows, cols)), shape=(2 + L, 2 + L))
        H.eliminate_zeros()
        return H

    basis = build_basis(params, 2)
    ne = 2 * L
    n = basis.dim
    eye = sp.identity(L, format="csr")
    S = _pair_isometry(L)
    Hp = (S.T @ (sp.kron(h, eye) + sp.kron(eye, h)) @ S).tocoo()

    rows, cols, vals = [np.array([0])], [np.array([0])], [np.array([2 * D])]
    js = np.arange(L)
    hc = h.tocoo()
    for i, x in enumerate(xs):
        base = 1 + i * L
        rows += [base + js, base + hc.row]
        cols += [base + js, base + hc.col]
        vals += [np.full(L, D), hc.data]
        # photon emission from emitter (1-i) at its own cell, leaving emitter i excited
        pr = 1 + ne + basis.pair_index[x, js]
        gv = np.where(js == x, g * SQRT2, g)
        rows += [base + js, pr]
        cols += [pr, base + js]
        vals += [gv, gv]
        other = base + xs[1 - i]
        rows += [np.array([other, 0])]
        cols += [np.array([0, other])]
        vals += [np.array([g, g])]
    rows.append(Hp.row + 1 + ne)
    cols.append(Hp.col + 1 + ne)
    vals.append(Hp.data)
    H = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    H.sum_duplicates()
    H.eliminate_zeros()
    return H


def apply_hamiltonian(state, params):
    """H |state> as an unnormalised amplitude vector."""
    if state.basis.L != params.L or (state.basis.x1, state.basis.x2) != (params.x1, params.x2):
        raise ModelError("basis-mismatch", "state basis does not match params")
    return hamiltonian(params, state.basis.sector) @ state.amplitudes


def mirror_permutation(params, sector=None):
    """Index permutation of the emitter-exchange mirror about the bond centre.

    Returns ``perm`` with ``(R psi)[n] = psi[perm[n]]``.  Raises if the
    lattice is not mirror symmetric about that centre.
    """
    sector = params.n_excitations if sector is None else sector
    L = params.L
    s = params.x1 + params.x2
    if params.boundary == "open" and s != L - 1:
        raise ModelError(
            "no-mirror", f"open chain with L={L} is not symmetric about the emitter bond"
        )
    js = np.arange(L)
    mj = (s - js) % L
    if sector == 1:
        return np.concatenate([[1, 0], 2 + mj])
    basis = build_basis(params, 2)
    jj, kk = basis.pair_sites()
    perm = np.empty(basis.dim, dtype=np.int64)
    perm[0] = 0
    perm[1 : 1 + L] = 1 + L + mj
    perm[1 + L : 1 + 2 * L] = 1 + mj
    perm[1 + 2 * L :] = 1 + 2 * L + basis.pair_index[mj[jj], mj[kk]]
    return perm


def light_cone_reach(params):
    """Sites between the emitters and the nearest boundary."""
    if params.boundary == "periodic":
        return (params.L - params.spacing) // 2
    return min(params.x1, params.L - 1 - params.x2)


def light_cone_ok(params, t_max, margin=20):
    """True when 2J t_max + margin stays inside the lattice."""
    return 2.0 * params.J * t_max + margin < light_cone_reach(params)


def last_untagged_time(params, margin=20):
    return max(0.0, (light_cone_reach(params) - margin) / (2.0 * params.J))


def lattice_for(t_max, J=1.0, margin=20, even=True):
    """Smallest lattice length whose light-cone guard covers ``t_max``."""
    reach = int(np.floor(2 * J * t_max + margin)) + 1
    L = 2 * reach + 2
    if not even:
        L += 1
    return L


def guard_warning(params, t_max, margin=20):
    if not light_cone_ok(params, t_max, margin):
        warnings.warn(
            f"light cone reaches the boundary before t={t_max:g} (L={params.L})",
            stacklevel=3,
        )
        return False
    return True
