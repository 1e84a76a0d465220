"""Brute-force time evolution on the finite lattice.

Two engines: full diagonalisation (small bases) and short-iterative Krylov
stepping.  The Krylov engine uses Lanczos with full reorthogonalisation on
Hermitian problems and switches to Arnoldi when an absorbing boundary makes
the generator non-Hermitian.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .model import (
    ModelError,
    QuantumState,
    SQRT2,
    build_basis,
    hamiltonian,
    last_untagged_time,
    light_cone_ok,
)

DENSE_MAX_DIM = 5000


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    n_samples: int

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.n_samples < 2:
            raise ValueError("need at least two samples")

    @property
    def times(self):
        return np.linspace(0.0, self.t_max, self.n_samples)

    @property
    def dt(self):
        return self.t_max / (self.n_samples - 1)


@dataclass(frozen=True)
class Absorber:
    """Imaginary potential -i*strength*((width - d)/width)^2 on the last
    ``width`` sites of each end, d being the distance to the boundary."""

    width: int
    strength: float = 0.5

    def profile(self, L):
        j = np.arange(L)
        edge = np.minimum(j, L - 1 - j)
        depth = np.clip((self.width - edge) / self.width, 0.0, None)
        return -1j * self.strength * depth**2


def absorbing_generator(params, absorber, sector=None):
    """H minus i*W, with W the absorber acting on every photon."""
    sector = params.n_excitations if sector is None else sector
    H = hamiltonian(params, sector).astype(np.complex128)
    w = absorber.profile(params.L)
    if sector == 1:
        diag = np.concatenate([[0, 0], w])
    else:
        basis = build_basis(params, 2)
        jj, kk = basis.pair_sites()
        diag = np.concatenate([[0], w, w, w[jj] + w[kk]])
    return (H + sp.diags(diag)).tocsr()


@dataclass
class ObservableSet:
    """Per-sample observables of a trajectory.

    ``C_plus``/``C_minus`` are the parity amplitudes.  In sector 2 they are
    C_1(x1) + s C_1(x2), with C_i(j) the amplitude of |e_i, j>; in sector 1
    they are the overlaps with (|e1> + s |e2>)/sqrt(2).
    """

    t: np.ndarray
    sector: int
    P_ee: np.ndarray
    P_e1: np.ndarray
    P_e2: np.ndarray
    P_one: np.ndarray
    P_two: np.ndarray
    photon_density: np.ndarray
    C_ee: np.ndarray
    C_plus: np.ndarray
    C_minus: np.ndarray
    emitter_photon: np.ndarray | None = None
    norm: np.ndarray | None = None
    energy: np.ndarray | None = None

    def total_probability(self):
        return self.P_ee + self.P_one + self.P_two

    def C_sigma(self, sigma):
        return self.C_plus if sigma > 0 else self.C_minus


@dataclass
class Trajectory:
    grid: TimeGrid
    params: object
    sector: int
    states: np.ndarray | None
    observables: ObservableSet
    metadata: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.grid.times

    def state(self, n):
        if self.states is None:
            raise PropagationError("trajectory was run without keep_states")
        return QuantumState(build_basis(self.params, self.sector), self.states[n], self.times[n])

    def untagged_mask(self):
        return self.times <= self.metadata.get("untagged_until", np.inf) + 1e-12


def observables_from_vectors(params, sector, times, vecs, H=None):
    """Observable record for a stack of amplitude vectors (n_samples, dim)."""
    L = params.L
    x1, x2 = params.x1, params.x2
    vecs = np.asarray(vecs)
    ns = vecs.shape[0]
    norm = np.linalg.norm(vecs, axis=1)
    energy = None
    if H is not None:
        energy = np.real(np.einsum("ni,ni->n", vecs.conj(), (H @ vecs.T).T))
    if sector == 1:
        e1, e2 = vecs[:, 0], vecs[:, 1]
        ph = vecs[:, 2:]
        dens = np.abs(ph) ** 2
        zero = np.zeros(ns)
        return ObservableSet(
            t=times,
            sector=1,
            P_ee=zero,
            P_e1=np.abs(e1) ** 2,
            P_e2=np.abs(e2) ** 2,
            P_one=dens.sum(axis=1) + np.abs(e1) ** 2 + np.abs(e2) ** 2,
            P_two=zero.copy(),
            photon_density=dens,
            C_ee=np.zeros(ns, complex),
            C_plus=(e1 + e2) / SQRT2,
            C_minus=(e1 - e2) / SQRT2,
            norm=norm,
            energy=energy,
        )
    cee = vecs[:, 0]
    c1 = vecs[:, 1 : 1 + L]
    c2 = vecs[:, 1 + L : 1 + 2 * L]
    pairs = vecs[:, 1 + 2 * L :]
    jj, kk = np.triu_indices(L)
    pp = np.abs(pairs) ** 2
    dens = np.abs(c1) ** 2 + np.abs(c2) ** 2
    # each pair contributes one photon to j and one to k; j == k gives two on j
    for n in range(ns):
        dens[n] += np.bincount(jj, pp[n], minlength=L) + np.bincount(kk, pp[n], minlength=L)
    p1 = (np.abs(c1) ** 2).sum(axis=1)
    p2 = (np.abs(c2) ** 2).sum(axis=1)
    pee = np.abs(cee) ** 2
    return ObservableSet(
        t=times,
        sector=2,
        P_ee=pee,
        P_e1=pee + p1,
        P_e2=pee + p2,
        P_one=p1 + p2,
        P_two=pp.sum(axis=1),
        photon_density=dens,
        C_ee=cee.copy(),
        C_plus=c1[:, x1] + c1[:, x2],
        C_minus=c1[:, x1] - c1[:, x2],
        emitter_photon=np.stack([c1, c2], axis=1),
        norm=norm,
        energy=energy,
    )


def extract_observables(traj):
    """Observables recomputed from stored states."""
    if traj.states is None:
        return traj.observables
    H = hamiltonian(traj.params, traj.sector)
    return observables_from_vectors(traj.params, traj.sector, traj.times, traj.states, H)


def _check_state(state0, params):
    b = state0.basis
    if (b.L, b.x1, b.x2) != (params.L, params.x1, params.x2):
        raise ModelError("basis-mismatch", "initial state basis does not match params")
    if not np.isfinite(state0.amplitudes).all():
        raise PropagationError("non-finite initial amplitudes")
    return b.sector


def _metadata(params, engine, grid, margin, **extra):
    ok = light_cone_ok(params, grid.t_max, margin)
    md = {
        "engine": engine,
        "params_hash": params.digest(),
        "light_cone_ok": bool(ok),
        "untagged_until": float(min(grid.t_max, last_untagged_time(params, margin))),
    }
    md.update(extra)
    return md


def evolve_dense(state0, params, grid, keep_states=True, margin=20):
    """Exact evolution through the eigendecomposition of H."""
    sector = _check_state(state0, params)
    H = hamiltonian(params, sector)
    if H.shape[0] > DENSE_MAX_DIM:
        raise PropagationError(f"dense engine limited to dim <= {DENSE_MAX_DIM}, got {H.shape[0]}")
    w, V = np.linalg.eigh(H.toarray())
    coef = V.T @ state0.amplitudes
    times = grid.times
    vecs = (V @ (np.exp(-1j * np.outer(w, times)) * coef[:, None])).T
    if not np.isfinite(vecs).all():
        raise PropagationError("non-finite amplitudes")
    obs = observables_from_vectors(params, sector, times, vecs, H)
    md = _metadata(params, "dense", grid, margin, tol=0.0)
    return Trajectory(grid, params, sector, vecs if keep_states else None, obs, md)


def _small_expm(T, tau, hermitian):
    """First column of exp(-i tau T) for the projected matrix T."""
    if hermitian:
        Tr = np.real(T)
        w, Q = np.linalg.eigh(0.5 * (Tr + Tr.T))
        return Q @ (np.exp(-1j * w * tau) * Q[0])
    return sla.expm(-1j * tau * T)[:, 0]


def krylov_step(matvec, v, tau, tol, m_max=40, hermitian=True, m_min=4):
    """Advance ``v`` by at most ``tau`` within the local error budget ``tol``.

    The subspace grows one vector at a time until the residual estimate
    beta * h_{m+1,m} * |[exp(-i tau T_m)]_{m,1}| drops below ``tol``; if
    ``m_max`` is reached first the step is shortened on the same subspace.
    Returns (new vector, time advanced, error estimate, subspace dim).
    """
    n = v.size
    V = np.zeros((m_max + 1, n), dtype=np.complex128)
    Hm = np.zeros((m_max + 1, m_max), dtype=np.complex128)
    beta = np.linalg.norm(v)
    if beta == 0:
        return v.copy(), tau, 0.0, 0
    V[0] = v / beta
    for j in range(m_max):
        w = matvec(V[j])
        if hermitian:
            a = np.vdot(V[j], w).real
            Hm[j, j] = a
            w = w - a * V[j]
            if j > 0:
                w = w - Hm[j, j - 1] * V[j - 1]
            # full reorthogonalisation keeps norm drift at roundoff level
            w = w - V[: j + 1].T @ (V[: j + 1].conj() @ w)
        else:
            for _ in range(2):
                c = V[: j + 1].conj() @ w
                Hm[: j + 1, j] += c
                w = w - V[: j + 1].T @ c
        b = np.linalg.norm(w)
        Hm[j + 1, j] = b
        if hermitian and j > 0:
            Hm[j - 1, j] = Hm[j, j - 1]
        m = j + 1
        if b <= 1e-13 * max(1.0, np.abs(Hm[: m, : m]).max()):
            # invariant subspace: exact for any step length
            y = _small_expm(Hm[:m, :m], tau, hermitian)
            return beta * (y @ V[:m]), tau, 0.0, m
        if m >= m_min or m == m_max:
            y = _small_expm(Hm[:m, :m], tau, hermitian)
            err = beta * b * abs(y[m - 1])
            if err <= tol:
                return beta * (y @ V[:m]), tau, err, m
        V[j + 1] = w / b
    m = m_max
    T = Hm[:m, :m]
    b = abs(Hm[m, m - 1])
    while True:
        tau *= 0.5
        if tau < 1e-12:
            raise PropagationError("Krylov step size collapsed")
        y = _small_expm(T, tau, hermitian)
        err = beta * b * abs(y[m - 1])
        if err <= tol:
            return beta * (y @ V[:m]), tau, err, m


def _merge(parts, params, sector, times):
    fields = ("P_ee", "P_e1", "P_e2", "P_one", "P_two", "photon_density", "C_ee",
              "C_plus", "C_minus", "emitter_photon", "norm", "energy")
    kw = {}
    for f in fields:
        vals = [getattr(p, f) for p in parts]
        kw[f] = None if vals[0] is None else np.concatenate(vals, axis=0)
    return ObservableSet(t=times, sector=sector, **kw)


def evolve_krylov(
    state0,
    params,
    grid,
    tol=1e-10,
    keep_states=True,
    m_max=40,
    absorber=None,
    margin=20,
    max_steps=1_000_000,
):
    """Short-iterative Krylov propagation sampled on ``grid``.

    Steps are cut so that every sample time is hit exactly and evaluated
    inside the current subspace.  With an ``absorber`` the generator is
    non-Hermitian (Arnoldi) and the norm decays.
    """
    if not (1e-12 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    sector = _check_state(state0, params)
    H = hamiltonian(params, sector)
    hermitian = absorber is None
    G = H if hermitian else absorbing_generator(params, absorber, sector)
    matvec = G.dot
    times = grid.times
    psi = state0.amplitudes.astype(np.complex128).copy()
    out = np.empty((times.size, psi.size), np.complex128) if keep_states else None
    parts = []

    def record(n, vec):
        if keep_states:
            out[n] = vec
        else:
            parts.append(observables_from_vectors(params, sector, times[n : n + 1], vec[None], H))

    record(0, psi)
    t = 0.0
    tau_try = min(grid.dt, 2.0)
    steps = 0
    max_err = 0.0
    max_m = 0
    for n in range(1, times.size):
        while times[n] - t > 1e-13:
            remaining = times[n] - t
            tau = min(tau_try, remaining)
            psi, done, err, m = krylov_step(matvec, psi, tau, tol, m_max, hermitian)
            if not np.isfinite(psi).all():
                raise PropagationError("non-finite amplitudes")
            max_err = max(max_err, err)
            max_m = max(max_m, m)
            t = times[n] if done >= remaining else t + done
            if done < tau:
                tau_try = done
            elif tau == tau_try and m < m_max // 2:
                tau_try *= 1.25
            steps += 1
            if steps > max_steps:
                raise PropagationError("Krylov propagation exceeded max_steps")
        record(n, psi)
    md = _metadata(
        params,
        "krylov",
        grid,
        margin,
        tol=tol,
        steps=steps,
        max_local_error=max_err,
        max_subspace=max_m,
        absorber=None if absorber is None else {"width": absorber.width, "strength": absorber.strength},
    )
    if keep_states:
        obs = observables_from_vectors(params, sector, times, out, H)
    else:
        obs = _merge(parts, params, sector, times)
    return Trajectory(grid, params, sector, out, obs, md)


def evolve(state0, params, grid, engine="krylov", tol=1e-10, **kw):
    if engine == "dense":
        return evolve_dense(state0, params, grid, keep_states=kw.get("keep_states", True))
    if engine == "krylov":
        return evolve_krylov(state0, params, grid, tol=tol, **kw)
    raise ValueError(f"unknown engine {engine!r}")
