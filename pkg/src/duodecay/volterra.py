"""Time-marching kernels for the two-excitation emission-time equations.

For each parity s the amplitude c_s(t, u) (first photon emitted at u,
second-stage amplitude at t >= u) obeys the second-kind equation

    c(t, u) = s C_ee(u) + W(t, u) + int_u^t k(t - v) c(v, u) dv,
    k(tau)  = -i delta - g^2 Kint(tau),
    W(t, u) = -g^2 int_0^u [Kint(t - v) - Kint(u - v)] c(u, v) dv,

with Kint the running integral of the kernel K_s, coupled to

    dC_ee/dt = -2 i delta C_ee - i g sum_s s C_s(t),
    C_s(t)   = -i g int_0^t K_s(t - v) c_s(t, v) dv,   c_s(t, t) = s C_ee(t).

Everything is discretised with the trapezoid rule (implicit on the
diagonal), so the error has a clean h^2 expansion for extrapolation.
"""
from __future__ import annotations

import numpy as np
from scipy import special

from . import _accel


def kernel_tables(h, N, sigma, J=1.0, d=1):
    """K_s and its running integral on tau = 0, h, ..., N h."""
    tau = np.arange(N + 1) * h
    x = 2 * J * tau
    d = abs(int(d))
    phase = 1j**d
    K = special.j0(x) + sigma * phase * special.jv(d, x)
    # int_0^x J0 via Struve functions; scipy's itj0y0 loses accuracy for x > 20
    intJ0 = x * special.j0(x) + 0.5 * np.pi * x * (
        special.j1(x) * special.struve(0, x) - special.j0(x) * special.struve(1, x)
    )
    if d == 1:
        intJd = 1.0 - special.j0(x)
    else:
        intJd = integral_bessel(d, x)
    Kint = (intJ0 + sigma * phase * intJd) / (2 * J)
    return K, Kint


def integral_bessel(n, x, terms=None):
    """int_0^x J_n(u) du = 2 sum_k J_{n+2k+1}(x)."""
    x = np.asarray(x, dtype=float)
    if terms is None:
        terms = int(x.max() if x.size else 0) + 40
    k = np.arange(terms)
    return 2.0 * special.jv(n + 2 * k[:, None] + 1, x[None, :]).sum(axis=0)


@_accel.njit(fastmath=True)
def _march_numba(K, Kint, sig, g, D, h, N):
    ns = sig.shape[0]
    c = np.zeros((ns, N + 1, N + 1), np.complex128)
    kf = np.empty((ns, N + 1), np.complex128)
    for a in range(ns):
        for k in range(N + 1):
            kf[a, k] = -1j * D - g * g * Kint[a, k]
    A = np.zeros((ns, N + 1), np.complex128)
    Cee = np.zeros(N + 1, np.complex128)
    Cs = np.zeros((ns, N + 1), np.complex128)
    mem = np.zeros(N + 1, np.complex128)
    ws = np.zeros(N + 1, np.complex128)
    kr = np.zeros(N + 1, np.complex128)
    Cee[0] = 1.0
    for a in range(ns):
        c[a, 0, 0] = sig[a]
    g2 = g * g
    fprev = -2j * D * Cee[0]
    for n in range(1, N + 1):
        b = 0j
        for a in range(ns):
            s = sig[a]
            for m in range(n):
                mem[m] = 0.0
                ws[m] = 0.0
                kr[m] = Kint[a, n - m]
            # one row-major sweep of the lower triangle feeds both history sums:
            # mem[m] = sum_l kf[n-l] c[l, m],  ws[l] = sum_m Kint[n-m] c[l, m]
            for l in range(n):
                kl = kf[a, n - l]
                row = c[a, l]
                acc = 0j
                for m in range(l + 1):
                    v = row[m]
                    mem[m] += kl * v
                    acc += kr[m] * v
                ws[l] = acc
            denom = 1.0 - 0.5 * h * kf[a, 0]
            for m in range(n):
                dg = c[a, m, m]
                memm = h * (mem[m] - 0.5 * kf[a, n - m] * dg)
                W = 0j
                if m > 0:
                    wacc = h * (ws[m] - 0.5 * Kint[a, n] * c[a, m, 0] - 0.5 * Kint[a, n - m] * dg)
                    W = -g2 * (wacc - A[a, m])
                c[a, n, m] = (s * Cee[m] + W + memm) / denom
            r = -0.5 * K[a, n] * c[a, n, 0]
            for l in range(n):
                r += K[a, n - l] * c[a, n, l]
            Cs[a, n] = -1j * g * h * r
            b += -1j * g * s * Cs[a, n]
        # the diagonal term of each C_s contributes -g^2 h/2 C_ee per parity
        co = -2j * D - 0.5 * g2 * h * ns
        Cn = (Cee[n - 1] + 0.5 * h * (fprev + b)) / (1.0 - 0.5 * h * co)
        Cee[n] = Cn
        fprev = co * Cn + b
        for a in range(ns):
            s = sig[a]
            c[a, n, n] = s * Cn
            Cs[a, n] += -1j * g * 0.5 * h * K[a, 0] * s * Cn
            acc = -0.5 * Kint[a, n] * c[a, n, 0] + 0.5 * Kint[a, 0] * c[a, n, n]
            for l in range(n):
                acc += Kint[a, n - l] * c[a, n, l]
            A[a, n] = h * acc
    return Cee, Cs, c


def _march_numpy(K, Kint, sig, g, D, h, N):
    ns = sig.shape[0]
    c = np.zeros((ns, N + 1, N + 1), np.complex128)
    kf = -1j * D - g * g * Kint
    A = np.zeros((ns, N + 1), np.complex128)
    Cee = np.zeros(N + 1, np.complex128)
    Cs = np.zeros((ns, N + 1), np.complex128)
    Cee[0] = 1.0
    c[:, 0, 0] = sig
    g2 = g * g
    fprev = -2j * D * Cee[0]
    for n in range(1, N + 1):
        rev = n - np.arange(n)  # n - l for l = 0..n-1
        b = 0j
        for a in range(ns):
            s = sig[a]
            cb = c[a, :n, :n]  # lower triangle: c[l, m] = 0 for l < m
            dg = np.diagonal(cb)
            mem = (kf[a, rev] @ cb - 0.5 * kf[a, rev] * dg) * h
            # sum_{l=0}^{m} Kint[n-l] c[m,l], trapezoid ends removed below
            wsum = cb @ Kint[a, rev]
            wacc = h * (wsum - 0.5 * Kint[a, n] * cb[:, 0] - 0.5 * Kint[a, rev] * dg)
            W = -g2 * (wacc - A[a, :n])
            W[0] = 0.0
            c[a, n, :n] = (s * Cee[:n] + W + mem) / (1.0 - 0.5 * h * kf[a, 0])
            row = c[a, n, :n]
            r = row @ K[a, rev] - 0.5 * K[a, n] * row[0]
            Cs[a, n] = -1j * g * h * r
            b += -1j * g * s * Cs[a, n]
        co = -2j * D - 0.5 * g2 * h * ns
        Cn = (Cee[n - 1] + 0.5 * h * (fprev + b)) / (1.0 - 0.5 * h * co)
        Cee[n] = Cn
        fprev = co * Cn + b
        for a in range(ns):
            s = sig[a]
            c[a, n, n] = s * Cn
            Cs[a, n] += -1j * g * 0.5 * h * K[a, 0] * s * Cn
            row = c[a, n, : n + 1]
            A[a, n] = h * (row[:n] @ Kint[a, rev] - 0.5 * Kint[a, n] * row[0] + 0.5 * Kint[a, 0] * row[n])
    return Cee, Cs, c


def march(K, Kint, sig, g, D, h, N, engine=None):
    """Run the march; ``engine`` is 'numba', 'numpy' or None (env default)."""
    if engine is None:
        engine = "numba" if _accel.USE_NUMBA else "numpy"
    sig = np.asarray(sig, dtype=np.float64)
    K = np.ascontiguousarray(K, dtype=np.complex128)
    Kint = np.ascontiguousarray(Kint, dtype=np.complex128)
    if engine == "numba":
        if not _accel.HAVE_NUMBA:
            raise RuntimeError("numba engine requested but numba is unavailable")
        return _march_numba(K, Kint, sig, float(g), float(D), float(h), int(N))
    if engine == "numpy":
        return _march_numpy(K, Kint, sig, float(g), float(D), float(h), int(N))
    raise ValueError(f"unknown engine {engine!r}")


def solve_level(J, g, D, h, N, d=1, engine=None):
    """One trapezoid level for both parities (index 0 is s=+1)."""
    sig = np.array([1.0, -1.0])
    if g == 0:
        # decoupled emitters: exact phases, nothing is emitted
        t = np.arange(N + 1) * h
        Cee = np.exp(-2j * D * t)
        c = sig[:, None, None] * np.tril(np.exp(-1j * D * (t[:, None] + t[None, :])))[None]
        return Cee, np.zeros((2, N + 1), complex), c
    tabs = [kernel_tables(h, N, s, J, d) for s in sig]
    K = np.array([t[0] for t in tabs])
    Kint = np.array([t[1] for t in tabs])
    return march(K, Kint, sig, g, D, h, N, engine)
