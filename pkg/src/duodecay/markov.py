"""Markovian cascade |ee> -> |s> -> vacuum for two emitters on the waveguide.

With k0 the resonant wavenumber (-2J cos k0 = delta) the single-emitter rate
is Gamma = g^2 / (J sin k0) times a convention constant pinned against an
exact weak-coupling run.  The one-excitation parity states decay with
Gamma_s = Gamma (1 + s cos(k0 d)) and are shifted by
s g^2 sin(k0 d) / (2 J sin k0).  From |ee> the doubly excited state decays
at Gamma_+ + Gamma_- = 2 Gamma, feeding |s> at rate Gamma_s.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# pinned by fitting the exact single-excitation decay at g = 0.05 J, delta = 0
GAMMA_CONSTANT = 1.0


@dataclass(frozen=True)
class MarkovModel:
    gamma: float
    k0: float
    phase: float
    gamma_plus: float
    gamma_minus: float
    exchange: float
    valid: bool

    @property
    def gamma_total(self):
        return self.gamma_plus + self.gamma_minus

    def rate(self, sigma):
        return self.gamma_plus if sigma > 0 else self.gamma_minus


def markov_rates(params, constant=GAMMA_CONSTANT, edge_margin=5.0):
    """Rates of the cascade; ``valid`` is False near or outside the band edges."""
    J, g, D = params.J, params.g, params.delta
    d = params.spacing
    if abs(D) >= 2 * J:
        return MarkovModel(0.0, float("nan"), float("nan"), 0.0, 0.0, 0.0, False)
    k0 = float(np.arccos(-D / (2 * J)))
    gamma = constant * g * g / (J * np.sin(k0))
    phase = k0 * d
    gp = gamma * (1 + np.cos(phase))
    gm = gamma * (1 - np.cos(phase))
    exchange = g * g * np.sin(phase) / (2 * J * np.sin(k0))
    valid = bool(2 * J - abs(D) >= edge_margin * gamma) and gamma > 0
    return MarkovModel(float(gamma), k0, float(phase), float(max(gp, 0.0)), float(max(gm, 0.0)),
                       float(exchange), valid)


@dataclass
class MarkovPopulations:
    t: np.ndarray
    P_ee: np.ndarray
    P_one: np.ndarray
    P_vacuum: np.ndarray
    P_sigma: dict


def _feed(gs, gt, t):
    # population of |s> fed at rate gs from a level decaying at gt, itself decaying at gs
    if abs(gt - gs) < 1e-12 * max(gt, 1e-300):
        return gs * t * np.exp(-gs * t)
    return gs * (np.exp(-gs * t) - np.exp(-gt * t)) / (gt - gs)


def markov_populations(model, times):
    """Closed-form cascade populations; they sum to one at every time."""
    t = np.asarray(times, dtype=float)
    gt = model.gamma_total
    pee = np.exp(-gt * t)
    ps = {s: _feed(model.rate(s), gt, t) for s in (1, -1)}
    one = ps[1] + ps[-1]
    vac = 1.0 - pee - one
    return MarkovPopulations(t, pee, one, vac, ps)


def single_excitation_survival(model, times, sigma):
    """|<s|psi(t)>|^2 for psi(0) = |s> in the Markov limit."""
    return np.exp(-model.rate(sigma) * np.asarray(times))


def fit_rate(times, population):
    """Least-squares slope of -log(population); used to pin the convention constant."""
    t = np.asarray(times)
    y = np.log(np.asarray(population))
    A = np.vstack([np.ones_like(t), -t]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[1])
