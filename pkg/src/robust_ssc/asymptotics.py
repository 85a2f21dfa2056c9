"""Large-system predictions for the norm of the LASSO solution with a null signal.

With a d x N Gaussian design (entries N(0, 1/d)), pure-noise response and
delta = d/N fixed, the LASSO solution is characterized by a threshold alpha
and an effective noise level tau solving

    lam   = alpha * tau * (1 - (2/delta) * P(Z >= alpha))
    tau^2 = sigma^2 / (1 - E[eta(Z; alpha)^2] / delta)

and ||x_hat||^2 / N -> delta * (tau^2 - sigma^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import NoSolutionError

SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass
class AsymptoticState:
    delta: float
    alpha: float
    tau_star: float
    lam: float
    sigma: float
    eta_moment: float
    residuals: tuple = (0.0, 0.0)

    @property
    def norm_sq(self) -> float:
        """||x_hat||^2 when sigma^2 = 1/d, i.e. E/(delta - E)."""
        return self.eta_moment / (self.delta - self.eta_moment)

    def solution_norm_sq(self, N) -> float:
        return N * self.delta * (self.tau_star**2 - self.sigma**2)


def soft_threshold(t, theta):
    """eta(t, theta) = sgn(t) * max(|t| - theta, 0)."""
    if theta < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(t) * np.maximum(np.abs(t) - theta, 0.0)


def upper_tail(alpha):
    """P(Z >= alpha) for standard normal Z."""
    return 0.5 * erfc(alpha / SQRT2)


def eta_moment(alpha) -> float:
    """E[eta(Z; alpha)^2] for Z ~ N(0, 1), in closed form."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return float((alpha**2 + 1) * erfc(alpha / SQRT2)
                 - alpha * SQRT_2_OVER_PI * math.exp(-alpha**2 / 2))


def bisect(f, lo, hi, xtol=1e-15, ftol=0.0, max_iter=400):
    """Bisection for a sign change of f on [lo, hi]."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoSolutionError(f"no sign change on [{lo}, {hi}]: f = {flo:.3e}, {fhi:.3e}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or abs(fm) <= ftol or hi - lo <= xtol * max(1.0, abs(mid)):
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fixed_point(delta, sigma, lam) -> AsymptoticState:
    """Solve the two state-evolution equations for (alpha, tau).

    tau is eliminated and the remaining scalar equation in alpha is solved by
    bisection on the interval where 1 - E[eta^2]/delta > 0.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    # left end: E[eta(Z; alpha)^2] = delta, below which tau^2 would be negative
    a_min = bisect(lambda a: eta_moment(a) - delta, 0.0, 40.0)

    def h(a):
        slack = max(1.0 - eta_moment(a) / delta, 0.0)
        return lam * math.sqrt(slack) - a * sigma * (1.0 - 2.0 / delta * upper_tail(a))

    if not h(a_min) > 0:
        raise NoSolutionError(f"no admissible threshold for delta={delta}, lam={lam}")
    hi = max(2.0 * a_min, 1.0)
    while h(hi) > 0:
        hi *= 2.0
        if hi > 1e8:
            raise NoSolutionError(f"no bracket for lam={lam}: equation stays positive")
    alpha = bisect(h, a_min, hi)

    E = eta_moment(alpha)
    tau = math.sqrt(sigma**2 / (1.0 - E / delta))
    res1 = lam - alpha * tau * (1.0 - 2.0 / delta * upper_tail(alpha))
    res2 = tau**2 - sigma**2 / (1.0 - E / delta)
    return AsymptoticState(delta, alpha, tau, lam, sigma, E, (res1, res2))


def crossing_gap(alpha) -> float:
    """erfc(alpha/sqrt2) minus sqrt(2/pi) * alpha / (alpha^2 + 1/2) * exp(-alpha^2/2)."""
    return float(erfc(alpha / SQRT2)
                 - SQRT_2_OVER_PI * alpha / (alpha**2 + 0.5) * math.exp(-alpha**2 / 2))


def rho_star(xtol=1e-12):
    """Threshold, aspect ratio and density where the noiseless bound equals one.

    Returns (alpha*, delta*, rho*) with delta* = erfc(alpha*/sqrt2) and
    rho* = 1/delta*.
    """
    a = bisect(crossing_gap, 0.0, 5.0, xtol=xtol)
    d = float(erfc(a / SQRT2))
    return a, d, 1.0 / d
