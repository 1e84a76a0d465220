"""Lattice Green functions of the cosine band and derived evaluators.

Points of the complex energy plane are parameterised by the root y of
z = -J (y + 1/y).  The physical sheet is |y| < 1; the second sheet is reached
by y -> 1/y.  Just above the cut, z = E + i0 with E = -2J cos k maps to
y = exp(ik), 0 < k < pi.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

PHYSICAL = "physical"
SECOND = "second"


class BranchPointError(ValueError):
    pass


def y_of_z(z, J=1.0, sheet=PHYSICAL, side=None):
    """Root y of J y^2 + z y + J = 0 on the requested sheet.

    For real z inside [-2J, 2J] the boundary value from ``side`` ('above',
    the default, or 'below') is used.
    """
    z = np.asarray(z, dtype=np.complex128)
    # strip signed zeros so the two square roots share one branch convention
    z = np.where(z.imag == 0, z.real + 0j, z)
    s = np.sqrt(z - 2 * J) * np.sqrt(z + 2 * J)
    y = (-z + s) / (2 * J)
    on_cut = (z.imag == 0) & (np.abs(z.real) <= 2 * J)
    if np.any(on_cut):
        if side not in (None, "above", "below"):
            raise ValueError("side must be 'above' or 'below'")
        k = np.arccos(np.clip(-z.real / (2 * J), -1.0, 1.0))
        sgn = -1.0 if side == "below" else 1.0
        y = np.where(on_cut, np.exp(1j * sgn * k), y)
    if sheet == SECOND:
        y = 1.0 / y
    elif sheet != PHYSICAL:
        raise ValueError(f"unknown sheet {sheet!r}")
    return y


def z_of_y(y, J=1.0):
    return -J * (y + 1.0 / y)


def _check_edges(z, J):
    z = np.asarray(z)
    if np.any((z.imag == 0) & (np.abs(z.real) == 2 * J)):
        raise BranchPointError("Green function evaluated at a branch point")


def green(z, d=0, J=1.0, sheet=PHYSICAL, side=None):
    """G_d(z) = <0|(z - h)^(-1)|d> = y^|d| / (J (y - 1/y))."""
    _check_edges(z, J)
    y = y_of_z(z, J, sheet, side)
    with np.errstate(divide="raise", invalid="raise"):
        try:
            return y ** abs(int(d)) / (J * (y - 1.0 / y))
        except FloatingPointError as exc:  # y = +-1 <=> z = -+2J
            raise BranchPointError("Green function evaluated at a branch point") from exc


def parity_green(z, sigma, d=1, J=1.0, sheet=PHYSICAL, side=None):
    """G_0 + sigma G_d."""
    _check_edges(z, J)
    y = y_of_z(z, J, sheet, side)
    return (1.0 + sigma * y ** abs(int(d))) / (J * (y - 1.0 / y))


def parity_green_dz(z, sigma, J=1.0):
    """d/dz (G_0 + sigma G_1) on the physical sheet, for d = 1."""
    y = y_of_z(z, J)
    return y**2 / (J**2 * (y - sigma) ** 2 * (y**2 - 1.0))


@dataclass(frozen=True)
class SpectralObject:
    """Complex-energy evaluator with explicit sheet bookkeeping.

    ``func`` is called as func(z, sheet, side).
    """

    func: object
    sheet: str = PHYSICAL
    branch_points: tuple = (-2.0, 2.0)
    sigma: int | None = None
    name: str = ""

    def __call__(self, z, side=None):
        z = np.asarray(z, dtype=np.complex128)
        for b in self.branch_points:
            if np.any(z == b):
                raise BranchPointError(f"{self.name or 'evaluator'} at branch point {b}: use a limit")
        return self.func(z, self.sheet, side)

    def on_sheet(self, sheet):
        return SpectralObject(self.func, sheet, self.branch_points, self.sigma, self.name)


def self_energy_object(params, sigma=None):
    """Sigma(z) = g^2 G_0 (single emitter) or g^2 (G_0 + sigma G_d)."""
    J, g, d = params.J, params.g, params.spacing

    if sigma is None:
        def f(z, sheet, side):
            return g * g * green(z, 0, J, sheet, side)
    else:
        def f(z, sheet, side):
            return g * g * parity_green(z, sigma, d, J, sheet, side)

    label = "self-energy" if sigma is None else f"self-energy[{'+' if sigma > 0 else '-'}]"
    return SpectralObject(f, PHYSICAL, (-2 * J, 2 * J), sigma, label)


# --- the Laplace transform of the emitter kernel -------------------------

@dataclass(frozen=True)
class PhiEvaluation:
    z: complex
    sigma: int
    d: int
    J: float
    value: complex
    error: float
    method: str
    flagged: bool = False


def kernel(tau, sigma, d=1, J=1.0):
    """K(tau) = U_0(tau) + sigma U_d(tau), U_d = i^|d| J_|d|(2 J tau)."""
    from scipy.special import jv

    x = 2 * J * np.asarray(tau, dtype=float)
    d = abs(int(d))
    return jv(0, x) + sigma * (1j**d) * jv(d, x)


def phi_closed(z, sigma, d=1, J=1.0):
    """Phi(z) = int_0^inf e^{i z tau} K(tau) dtau = i (1 + sigma y^|d|) / (J (y - 1/y)).

    Valid for Im z > 0 and continued analytically (physical sheet) to the
    rest of the plane minus the cut.
    """
    y = y_of_z(z, J)
    return 1j * (1.0 + sigma * y ** abs(int(d))) / (J * (y - 1.0 / y))


def _phi_momentum(z, sigma, d, J, tol):
    # i * int_{-pi}^{pi} dq/2pi (1 + sigma e^{iqd}) / (z + 2J cos q); real and imaginary parts
    def f(q, part):
        v = 1j * (1.0 + sigma * np.exp(1j * q * d)) / (z + 2 * J * np.cos(q)) / (2 * np.pi)
        return v.real if part == 0 else v.imag

    opts = dict(epsabs=tol * 0.1, epsrel=1e-13, limit=500)
    pts = None
    if abs(z.imag) < 0.2 and abs(z.real) < 2 * J:
        k = np.arccos(-z.real / (2 * J))
        pts = [-k, k]
    re, ere = integrate.quad(f, -np.pi, np.pi, args=(0,), points=pts, **opts)
    im, eim = integrate.quad(f, -np.pi, np.pi, args=(1,), points=pts, **opts)
    return re + 1j * im, float(np.hypot(ere, eim))


def phi(z, sigma, d=1, J=1.0, tol=1e-10, method="closed"):
    """Evaluate Phi_sigma(z; d).

    ``method='closed'`` is the production path; ``method='momentum'`` is an
    independent quadrature of the momentum-space representation, usable off
    the real interval [-2J, 2J].
    """
    z = complex(z)
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    if z.imag == 0 and abs(z.real) <= 2 * J:
        raise ValueError("Phi is defined off the band interval; give Im z != 0")
    if method == "closed":
        return PhiEvaluation(z, sigma, int(d), J, complex(phi_closed(z, sigma, d, J)), 0.0, method)
    if method == "momentum":
        v, err = _phi_momentum(z, sigma, int(d), J, tol)
        return PhiEvaluation(z, sigma, int(d), J, v, err, method, flagged=err > tol)
    raise ValueError(f"unknown method {method!r}")


def phi_dual(z, sigma, d=1, J=1.0, tol=1e-8):
    """Both paths; ``flagged`` is set when they disagree beyond ``tol``."""
    a = phi(z, sigma, d, J, method="closed")
    b = phi(z, sigma, d, J, tol=tol * 1e-2, method="momentum")
    diff = abs(a.value - b.value)
    return PhiEvaluation(a.z, sigma, int(d), J, a.value, diff, "dual", flagged=diff > tol)
