"""Exact one-excitation dynamics of the two emitters.

The mirror-symmetric and antisymmetric emitter states (|e1> + s|e2>)/sqrt(2)
decouple.  Each has the resolvent 1/(z - delta - Sigma_s(z)) with
Sigma_s = g^2 (G_0 + s G_d); the amplitude is recovered from its real poles
outside the band plus the discontinuity across the cut.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .greens import BranchPointError, green, parity_green, parity_green_dz, y_of_z
from .model import ModelParams, hamiltonian


@dataclass(frozen=True)
class BoundState1:
    energy: float
    sigma: int
    weight: float
    localization_length: float
    residual: float


class QuadratureWarning(UserWarning):
    pass


def collective_self_energy(z, sigma, params, side=None):
    """Sigma_s(z) = g^2 (G_0(z) + s G_d(z)); ``sigma=None`` gives g^2 G_0.

    ``side`` picks the boundary value on the cut ('above' is retarded).
    """
    J, g = params.J, params.g
    z = np.asarray(z, dtype=np.complex128)
    if np.any((z.imag == 0) & (np.abs(np.abs(z.real) - 2 * J) == 0)):
        raise BranchPointError("self-energy at a branch point; evaluate as a limit")
    if sigma is None:
        return g * g * green(z, 0, J, side=side)
    return g * g * parity_green(z, sigma, params.spacing, J, side=side)


def _pole_function(E, sigma, params):
    return E - params.delta - params.g**2 * parity_green(E, sigma, params.spacing, params.J).real


def _pole_derivative(E, sigma, params):
    return 1.0 - params.g**2 * parity_green_dz(E, sigma, params.J).real


def find_bound_states_1exc(params, xtol=1e-15):
    """All real poles outside the band, both parities, sorted by energy.

    Outside the band E - delta - Sigma_s(E) is strictly increasing, so each
    side of the band holds at most one root per parity and a sign test on
    the bracket is conclusive.
    """
    if params.spacing != 1:
        raise NotImplementedError("closed-form pole derivative assumes adjacent emitters")
    J, g, D = params.J, params.g, params.delta
    out = []
    if g == 0:
        return out
    eps = 1e-14 * J
    span = abs(D) + 10 * max(g * g / J, J) + 1.0
    for sigma in (1, -1):
        for lo, hi in ((2 * J + eps, 2 * J + span), (-2 * J - span, -2 * J - eps)):
            flo = _pole_function(lo, sigma, params)
            fhi = _pole_function(hi, sigma, params)
            if not np.isfinite(flo) or not np.isfinite(fhi):
                raise RuntimeError("pole function not finite on bracket ends")
            if flo * fhi > 0:
                continue
            E = optimize.brentq(_pole_function, lo, hi, args=(sigma, params), xtol=xtol, rtol=1e-15, maxiter=500)
            res = abs(_pole_function(E, sigma, params))
            w = 1.0 / _pole_derivative(E, sigma, params)
            ay = abs(y_of_z(E, J).real)
            xi = -1.0 / np.log(ay) if 0 < ay < 1 else np.inf
            out.append(BoundState1(float(E), sigma, float(w), float(xi), float(res)))
    out.sort(key=lambda b: b.energy)
    return out


def bound_states_from_cubic(params):
    """Independent pole search: roots |y| < 1 of the polynomial form of the pole equation.

    With z = -J(y + 1/y) the pole condition becomes
    -J^2 (y^2 + 1)(y - s) - delta J y (y - s) - g^2 s y^2 = 0.
    """
    J, g, D = params.J, params.g, params.delta
    out = []
    for s in (1, -1):
        # expand: -J^2 (y^3 - s y^2 + y - s) - D J (y^2 - s y) - g^2 s y^2
        coeffs = [-J * J, J * J * s - D * J - g * g * s, -J * J + D * J * s, J * J * s]
        for y in np.roots(coeffs):
            if abs(y.imag) < 1e-9 and abs(y.real) < 1 - 1e-12 and y.real != 0:
                out.append((float(-J * (y.real + 1 / y.real)), s))
    return sorted(out)


def spectral_density(E, sigma, params):
    """-(1/pi) Im 1/(E - delta - Sigma_s(E + i0)) for E inside the band."""
    S = collective_self_energy(np.asarray(E, dtype=float) + 0j, sigma, params, side="above")
    return -np.imag(1.0 / (E - params.delta - S)) / np.pi


def _cut_integrand_k(k, t, sigma, params):
    # E = -2J cos k, dE = 2J sin k dk; y = e^{ik} on the upper rim
    J, g = params.J, params.g
    y = np.exp(1j * k)
    E = -2 * J * np.cos(k)
    G = (1.0 + sigma * y**params.spacing) / (J * (y - 1.0 / y))
    rho = -np.imag(1.0 / (E - params.delta - g * g * G)) / np.pi
    w = rho * 2 * J * np.sin(k)
    return w[..., None] * np.exp(-1j * np.multiply.outer(E, t))


def cut_weight(sigma, params, tol=1e-12):
    """Spectral weight carried by the continuum."""
    J = params.J

    def f(k):
        return spectral_density(-2 * J * np.cos(k), sigma, params) * 2 * J * np.sin(k)

    val, err = integrate.quad(f, 0.0, np.pi, epsabs=tol, epsrel=1e-14, limit=400)
    return val, err


def sum_rule(sigma, params):
    """sum of pole weights + continuum weight (equals 1)."""
    w = sum(b.weight for b in find_bound_states_1exc(params) if b.sigma == sigma)
    c, _ = cut_weight(sigma, params)
    return w + c


def continuum_amplitude(t, sigma, params, tol=1e-10, full_output=False):
    """Cut contribution int rho_s(E) e^{-iEt} dE for an array of times.

    The substitution E = -2J cos k turns the inverse-square-root edge
    behaviour of rho into a smooth integrand; adaptive Gauss-Kronrod
    bisection is applied to all times at once.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f = lambda k: _cut_integrand_k(np.asarray(k), t, sigma, params)
    # split the interval so oscillatory times get enough initial panels
    n_pan = int(min(4000, max(8, np.ceil(2 * params.J * t.max() / 2.0))))
    edges = np.linspace(0.0, np.pi, n_pan + 1)
    total = np.zeros(t.size, complex)
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad_vec(
            f, a, b, epsabs=tol / n_pan, epsrel=1e-13, norm="max", limit=200
        )
        total += v
        err += e
    if full_output:
        return total, err
    return total


def pole_amplitude(t, sigma, params, bound_states=None):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    bs = find_bound_states_1exc(params) if bound_states is None else bound_states
    out = np.zeros(t.size, complex)
    for b in bs:
        if b.sigma == sigma:
            out += b.weight * np.exp(-1j * b.energy * t)
    return out


def emitter_amplitude_1exc(t, sigma, params, tol=1e-10, full_output=False):
    """Amplitude <s|psi(t)> for psi(0) = |s> = (|e1> + s|e2>)/sqrt(2).

    Sum of pole residues plus the cut integral.  With ``full_output`` the
    quadrature error estimate is returned too; callers needing a guaranteed
    accuracy must check it.
    """
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if params.g == 0:
        val = np.exp(-1j * params.delta * t)
        err = 0.0
    else:
        cont, err = continuum_amplitude(t, sigma, params, tol, full_output=True)
        val = pole_amplitude(t, sigma, params) + cont
    if scalar:
        val = val[0]
    return (val, err) if full_output else val


# --- lattice oracle for the poles ----------------------------------------

def lattice_bound_states_1exc(params, L=2002):
    """Eigenpairs of the finite single-excitation lattice outside the band.

    Returns (energy, parity, emitter weight) tuples from a dense
    diagonalisation; parity is read off the emitter components, which needs
    an even ``L`` so that the chain is mirror symmetric about the emitter bond.
    """
    p = ModelParams(J=params.J, g=params.g, delta=params.delta, L=L, n_excitations=1)
    H = hamiltonian(p, 1).toarray()
    w, v = np.linalg.eigh(H)
    J = params.J
    out = []
    for e, vec in zip(w, v.T):
        if abs(e) <= 2 * J:
            continue
        wt = vec[0] ** 2 + vec[1] ** 2
        par = 1 if abs(vec[0] - vec[1]) < abs(vec[0] + vec[1]) else -1
        out.append((float(e), par, float(wt)))
    return out
