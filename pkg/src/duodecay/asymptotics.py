"""Classification of long-time decay tails.

Four candidate laws are fitted by linear least squares on log y:

    exponential     log y = a - G t
    algebraic       log y = a + p log t
    algebraic-log   log y = a + p log t + q log log t
    mixed           log y = a + p log t - G t     (G profiled on a log grid)

and ranked by the small-sample corrected Akaike score.  Within ``tie``
score units the simpler class wins (exponential < algebraic <
algebraic-log < mixed).  Oscillating series are reduced to their envelope
of local maxima first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _accel
from ._accel import njit

CLASSES = ("exponential", "algebraic", "algebraic-log", "mixed")
COMPLEXITY = {c: i for i, c in enumerate(CLASSES)}
LN2 = math.log(2.0)


class TailFitError(ValueError):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass
class DecayLawFit:
    cls: str
    rate: float | None
    exponent: float | None
    log_power: float | None
    log_flag: bool
    window: tuple
    residual_norm: float
    scores: dict
    params: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)
    verdict: str = "ok"
    provenance: dict = field(default_factory=dict)

    @property
    def fractional(self):
        """Algebraic with a non-integer exponent."""
        return self.exponent is not None and abs(self.exponent - round(self.exponent)) > 0.05

    def to_dict(self):
        return {
            "class": self.cls,
            "rate": self.rate,
            "exponent": self.exponent,
            "log_power": self.log_power,
            "log_flag": self.log_flag,
            "fractional": self.fractional,
            "window": list(self.window),
            "residual_norm": self.residual_norm,
            "scores": self.scores,
            "params": self.params,
            "stderr": self.stderr,
            "verdict": self.verdict,
            "provenance": self.provenance,
        }

    def model(self, t):
        """Evaluate the fitted law at ``t``."""
        t = np.asarray(t, dtype=float)
        p = self.params
        ly = p["a"] - p.get("G", 0.0) * t
        if "p" in p:
            ly = ly + p["p"] * np.log(t)
        if "q" in p:
            ly = ly + p["q"] * np.log(np.log(t))
        return np.exp(ly)


def _design(cls, t):
    one = np.ones_like(t)
    if cls == "exponential":
        return np.column_stack([one, -t])
    if cls in ("algebraic", "mixed"):
        # for the mixed law the -G t term is moved to the left-hand side
        return np.column_stack([one, np.log(t)])
    if cls == "algebraic-log":
        return np.column_stack([one, np.log(t), np.log(np.log(t))])
    raise ValueError(cls)


def _lsq(X, y, cond_max=1e12):
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > cond_max:
        raise TailFitError("degenerate-fit", f"design matrix condition number {cond:.3g}")
    coef, res, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    rss = float(r @ r)
    return coef, rss


def _stderr(X, rss, n):
    k = X.shape[1]
    dof = max(n - k, 1)
    cov = np.linalg.inv(X.T @ X) * (rss / dof)
    return np.sqrt(np.clip(np.diag(cov), 0, None))


def aicc(rss, n, k, floor):
    rss = max(rss, n * floor * floor)
    return n * np.log(rss / n) + 2 * k + 2 * k * (k + 1) / max(n - k - 1, 1)


def peaks(t, y):
    """Local maxima of |y|, refined by a parabola through log|y| at each peak."""
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(y))
    la = np.log(np.maximum(a, 1e-300))
    h = np.diff(t)
    # only interior points with equal spacing on both sides: burst-sampled
    # series have gaps, and a maximum across a gap is not a peak
    even = np.abs(h[1:] - h[:-1]) <= 1e-9 * np.maximum(h[1:], h[:-1])
    i = np.nonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]) & even)[0] + 1
    y0, y1, y2 = la[i - 1], la[i], la[i + 1]
    den = y0 - 2 * y1 + y2
    off = np.where(den < 0, 0.5 * (y0 - y2) / np.where(den < 0, den, -1.0), 0.0)
    off = np.clip(off, -0.5, 0.5)
    tp = t[i] + off * np.where(off < 0, h[i - 1], h[i])
    lp = y1 - 0.25 * (y0 - y2) * off
    return tp, np.exp(lp)


def envelope(t, y):
    """Envelope of |y| interpolated log-linearly through its local maxima."""
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(y))
    tp, yp = peaks(t, a)
    if tp.size < 4:
        return a
    return np.maximum(np.exp(np.interp(t, tp, np.log(yp))), a)


def is_oscillating(t, y, min_extrema=4):
    """True when |y| has at least ``min_extrema`` interior local maxima."""
    return peaks(t, y)[0].size >= min_extrema


def _profile_mixed(t, ly, grid_lo=1e-3, grid_hi=10.0, n_grid=200):
    X = _design("mixed", t)

    def rss_of(logG):
        G = np.exp(logG)
        coef, rss = _lsq(X, ly + G * t)
        return rss

    grid = np.linspace(np.log(grid_lo), np.log(grid_hi), n_grid)
    vals = np.array([rss_of(g) for g in grid])
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_grid - 1)]
    if hi > lo:
        r = optimize.minimize_scalar(rss_of, bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-12})
        logG = r.x if r.fun <= vals[i] else grid[i]
    else:
        logG = grid[i]
    G = float(np.exp(logG))
    coef, rss = _lsq(X, ly + G * t)
    # standard errors from the joint linearisation in (a, p, G)
    Xj = np.column_stack([X, -t])
    se = _stderr(Xj, rss, t.size)
    return coef, G, rss, se


def fit_tail(t, y, window=None, tie=6.0, floor=1e-3, classes=CLASSES, osc="auto"):
    """Fit and classify the decay of a positive series ``y(t)``.

    ``window`` = (t_lo, t_hi) restricts the fit; it must span two decades
    or hold at least 200 samples.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, y = t[m], y[m]
    if t.size < 8:
        raise TailFitError("window-too-short", "fewer than 8 samples in window")
    if not (t.size >= 200 or t[-1] >= 100 * t[0] > 0):
        raise TailFitError("window-too-short", "window must span two decades or 200 samples")
    y = np.abs(y) if np.iscomplexobj(y) else y
    if osc is True or (osc == "auto" and is_oscillating(t, y)):
        # fit the peaks themselves: interpolating between them biases the curvature
        t, y = peaks(t, y)
        if t.size < 8:
            raise TailFitError("window-too-short", "fewer than 8 envelope maxima in window")
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise TailFitError("non-positive", "series must be strictly positive on the window")
    ly = np.log(y)
    if np.ptp(ly) < 1e-10 * max(1.0, np.abs(ly).max()):
        raise TailFitError("no-decay", "series is constant on the window")
    if t[0] <= 1.0:
        # log log t needs t > 1
        classes = tuple(c for c in classes if c != "algebraic-log")
    n = t.size
    fits = {}
    for cls in classes:
        try:
            if cls == "mixed":
                coef, G, rss, se = _profile_mixed(t, ly)
                fits[cls] = (dict(a=coef[0], p=coef[1], G=G), rss, 3,
                             dict(a=se[0], p=se[1], G=se[2]))
            else:
                X = _design(cls, t)
                coef, rss = _lsq(X, ly)
                se = _stderr(X, rss, n)
                names = {"exponential": ("a", "G"), "algebraic": ("a", "p"),
                         "algebraic-log": ("a", "p", "q")}[cls]
                fits[cls] = (dict(zip(names, map(float, coef))), rss, len(names),
                             dict(zip(names, map(float, se))))
        except TailFitError:
            continue
    if not fits:
        raise TailFitError("degenerate-fit", "no candidate model could be fitted")
    scores = {c: float(aicc(f[1], n, f[2], floor)) for c, f in fits.items()}
    best = min(scores.values())
    near = [c for c in scores if scores[c] <= best + tie]
    cls = min(near, key=lambda c: COMPLEXITY[c])
    par, rss, k, se = fits[cls]
    par = {k2: float(v) for k2, v in par.items()}
    return DecayLawFit(
        cls=cls,
        rate=par.get("G"),
        exponent=par.get("p"),
        log_power=par.get("q"),
        log_flag=cls == "algebraic-log",
        window=(float(t[0]), float(t[-1])),
        residual_norm=float(np.sqrt(rss)),
        scores=scores,
        params=par,
        stderr=se,
    )


# --- producers ---------------------------------------------------------

OBSERVABLES = ("single-continuum", "P_ee", "C_ee-continuum", "C_plus-continuum", "C_minus-continuum")


def burst_times(t_min, t_max, centers=60, per_burst=20, period=None, J=1.0):
    """Log-spaced bursts of ``per_burst`` evenly spaced samples.

    Each burst spans about 1.6 ``period`` (default pi / 2J, the beat of the
    two band edges), so it holds at least one interior envelope maximum.
    """
    period = np.pi / (2 * J) if period is None else period
    step = period / 12
    c = np.geomspace(t_min, t_max - per_burst * step, centers)
    return (c[:, None] + step * np.arange(per_burst)[None, :]).ravel()


def _parity_chain(params, sigma, L):
    """Tridiagonal form of one parity sector of the open, mirror-centred chain.

    Site 0 is the emitter parity state; site m >= 1 is the mirror-(anti)symmetric
    photon pair at distance m - 1 from the central bond, whose hopping folds
    into the diagonal entry -sigma J.
    """
    n = 1 + L // 2
    d = np.zeros(n)
    d[0] = params.delta
    d[1] = -sigma * params.J
    e = np.full(n - 1, -float(params.J))
    e[0] = params.g
    return d, e


@njit
def _log_weights_nb(lam, mu):
    n = lam.size
    out = np.empty(n)
    for k in range(n):
        s = 0.0
        prod = 1.0
        for j in range(n - 1):
            lj = lam[j] if j < k else lam[j + 1]
            prod *= (lam[k] - mu[j]) / (lam[k] - lj)
            if j % 32 == 31:
                # renormalise before the running product can overflow
                m, ex = math.frexp(prod)
                s += ex
                prod = m
        out[k] = math.log(abs(prod)) + s * LN2
    return out


def _log_weights_np(lam, mu, chunk=256):
    n = lam.size
    out = np.empty(n)
    for a in range(0, n, chunk):
        l = lam[a:a + chunk, None]
        dl = np.abs(l - lam[None])
        dl[np.arange(l.shape[0]), np.arange(a, a + l.shape[0])] = 1.0
        out[a:a + chunk] = np.log(np.abs(l - mu[None])).sum(1) - np.log(dl).sum(1)
    return out


def chain_spectrum(d, e):
    """Eigenvalues and site-0 weights of a Jacobi matrix, from eigenvalues only.

    Uses w_k = prod_j (l_k - m_j) / prod_{j != k} (l_k - l_j) with m the
    spectrum of the matrix minus its first row and column; interlacing keeps
    each paired ratio well conditioned.
    """
    from scipy.linalg import eigh_tridiagonal

    lam = eigh_tridiagonal(d, e, eigvals_only=True, lapack_driver="sterf")
    mu = eigh_tridiagonal(d[1:], e[1:], eigvals_only=True, lapack_driver="sterf")
    lw = (_log_weights_nb if _accel.USE_NUMBA else _log_weights_np)(lam, mu)
    return lam, np.exp(lw)


def single_continuum_series(params, sigma, times, producer="analytic", tol=1e-10):
    """|c_s(t) - bound-state part|^2 for the one-excitation parity state."""
    from .single import continuum_amplitude
    from .model import lattice_for

    times = np.asarray(times, dtype=float)
    if producer == "analytic":
        a = continuum_amplitude(times, sigma, params, tol=tol)
        return np.abs(a) ** 2, {"producer": "analytic", "method": "cut-quadrature"}
    if producer != "oracle":
        raise ValueError(f"unknown producer {producer!r}")
    # exact spectral decomposition of the finite open lattice guarded by the light cone
    L = lattice_for(times.max(), params.J)
    lam, w = chain_spectrum(*_parity_chain(params, sigma, L))
    band = np.abs(lam) <= 2 * params.J
    lam, w = lam[band], w[band]
    amps = np.empty(times.size, complex)
    for i in range(0, times.size, 64):
        amps[i:i + 64] = np.exp(-1j * np.outer(times[i:i + 64], lam)) @ w
    return np.abs(amps) ** 2, {"producer": "oracle", "method": "lattice-spectral", "L": L}


def two_excitation_series(params, observable, t_max, dt=0.2, levels=2, h_coarse=0.2, engine=None):
    """Tail series from |ee> on a uniform grid, bound-state parts removed."""
    from .propagate import TimeGrid
    from .secular import bound_state_overlaps
    from .twoexc import solve_two_excitation

    n = int(round(t_max / dt))
    grid = TimeGrid(n * dt, n + 1)
    ta = solve_two_excitation(params, grid, levels=levels, h_coarse=h_coarse, engine=engine,
                              keep_full=False)
    t = ta.times
    prov = {"producer": "analytic", "method": "emission-time", "levels": levels,
            "h_coarse": h_coarse, "extrapolation_error": ta.error}
    if observable == "P_ee":
        return t, np.abs(ta.C_ee) ** 2, prov
    ov = bound_state_overlaps(params) if params.g > 0 else []
    if observable == "C_ee-continuum":
        b = sum(abs(o.ee) ** 2 * np.exp(-1j * o.energy * t) for o in ov)
        return t, np.abs(ta.C_ee - b), prov
    s = 1 if observable == "C_plus-continuum" else -1
    b = sum(np.conj(o.ee) * o.emitter_photon[s] * np.exp(-1j * o.energy * t) for o in ov)
    return t, np.abs(ta.C_sigma[s] - b), prov


def classify_decay(params, observable, t_range, producer="analytic", sigma=1, samples=None,
                   **fit_kw):
    """Produce ``observable`` over ``t_range`` and classify its tail.

    A constant series (for instance P_ee without coupling) yields a fit with
    verdict "no-decay" rather than an error.
    """
    if observable not in OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}")
    t0, t1 = t_range
    if observable == "single-continuum":
        t = burst_times(t0, t1, J=params.J) if samples is None else np.asarray(samples)
        y, prov = single_continuum_series(params, sigma, t, producer)
    else:
        if producer != "analytic":
            raise ValueError("two-excitation tails are produced by the analytic layer")
        t, y, prov = two_excitation_series(params, observable, t1)
    prov.update(observable=observable, sigma=sigma, params=params.digest())
    try:
        fit = fit_tail(t, y, window=(t0, t1), **fit_kw)
    except TailFitError as e:
        if e.code != "no-decay":
            raise
        fit = DecayLawFit("none", None, None, None, False, (t0, t1), 0.0, {}, verdict="no-decay")
    fit.provenance = prov
    fit.series = (t, y)
    return fit
