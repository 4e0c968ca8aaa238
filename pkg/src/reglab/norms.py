"""Weighted Lorentz quasi-norms, Luxemburg norms and the (Fund) constant."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .fields import ScalarField
from .geometry import Domain
from .weights import Weight

MAX_EXACT_KNOTS = 4096


@dataclass(frozen=True)
class LorentzParams:
    q: float
    s: float = math.inf

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("q must be positive")
        if not self.s > 0:
            raise ValueError("s must be positive or infinite")


@dataclass(frozen=True)
class YoungFunction:
    """power(p): t**p;  power_log(p): t**p * log(e + t)."""

    family: str
    p: float

    def __post_init__(self):
        if self.family not in ("power", "power_log"):
            raise ValueError(f"unknown Young family {self.family!r}")
        if not self.p >= 1:
            raise ValueError("Young functions need p >= 1 for convexity")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "power":
            return t ** self.p
        return t ** self.p * np.log(math.e + t)

    def inverse(self, y: float) -> float:
        if y < 0:
            raise ValueError("Young inverse needs y >= 0")
        if self.family == "power" or y == 0:
            return y ** (1.0 / self.p)
        # log(e + t) >= 1 puts the root below y^(1/p); solve for log t so that
        # tiny and huge y converge alike
        hi = y ** (1.0 / self.p)
        lo = (y / math.log(math.e + hi)) ** (1.0 / self.p)
        if lo == hi:
            return hi
        ly = math.log(y)

        def gap(s):
            return self.p * s + math.log(math.log(math.e + math.exp(s))) - ly

        return math.exp(brentq(gap, math.log(lo), math.log(hi), xtol=1e-15, maxiter=200))

    @property
    def delta2_p1(self) -> float:
        return self.p if self.family == "power" else self.p + 1.0

    def delta2_constant(self, samples=None) -> float:
        """max of Phi(2t)/Phi(t) over sample points."""
        t = np.logspace(-6, 6, 241) if samples is None else np.asarray(samples, dtype=float)
        return float(np.max(self(2 * t) / self(t)))


def _masses(field: ScalarField, weight: Weight, domain: Domain | None):
    mass = weight.values * field.grid.quad_weights()
    vals = np.abs(field.values)
    if domain is not None:
        m = domain.closure_mask
        return vals[m], mass[m]
    return vals.ravel(), mass.ravel()


def _lorentz_from_samples(vals: np.ndarray, mass: np.ndarray, params: LorentzParams,
                          lambda_quadrature: int) -> float:
    if vals.size == 0:
        raise ValueError("empty field")
    order = np.argsort(vals, kind="stable")
    vs, ms = vals[order], mass[order]
    top = float(vs[-1])
    if top == 0.0:
        return 0.0
    distinct = np.unique(vs)
    if distinct.size <= MAX_EXACT_KNOTS:
        knots = distinct
    else:
        knots = np.unique(np.quantile(vs, np.linspace(0.0, 1.0, MAX_EXACT_KNOTS)))
    knots = np.union1d(knots, [0.0, top])
    if knots.size < lambda_quadrature:
        knots = np.union1d(knots, np.linspace(0.0, top, lambda_quadrature))
    tail = np.concatenate([np.cumsum(ms[::-1])[::-1], [0.0]])
    D = tail[np.searchsorted(vs, knots, side="right")]        # omega(|f| > k)
    D_left = tail[np.searchsorted(vs, knots, side="left")]    # omega(|f| >= k)
    q, s = params.q, params.s
    if math.isinf(s):
        return float(np.max(knots * D_left ** (1.0 / q)))
    # exact lambda^(s-1) weights, trapezoid in D^(s/q) using the left limit on the right
    lam_w = (knots[1:] ** s - knots[:-1] ** s) / s
    integrand = 0.5 * (D[:-1] ** (s / q) + D_left[1:] ** (s / q))
    return float((q * np.sum(lam_w * integrand)) ** (1.0 / s))


def lorentz_norm(field: ScalarField, weight: Weight, params: LorentzParams,
                 lambda_quadrature: int = 64, domain: Domain | None = None) -> float:
    """[q int_0^inf lambda^(s-1) D(lambda)^(s/q) dlambda]^(1/s), or the sup form for s = inf."""
    if lambda_quadrature < 64:
        raise ValueError("lambda_quadrature must be >= 64")
    vals, mass = _masses(field, weight, domain)
    return _lorentz_from_samples(vals, mass, params, lambda_quadrature)


def weighted_lq(field: ScalarField, weight: Weight, q: float, domain: Domain | None = None) -> float:
    vals, mass = _masses(field, weight, domain)
    return float(np.sum(vals ** q * mass) ** (1.0 / q))


def luxemburg_norm(field: ScalarField, weight: Weight, phi: YoungFunction,
                   params: LorentzParams, domain: Domain | None = None,
                   iterations: int = 60, lambda_quadrature: int = 64) -> float:
    """inf{t > 0 : ||Phi(|f|/t)||_{L^{q,s}_omega} <= 1} by bisection in log t."""
    vals, mass = _masses(field, weight, domain)
    top = float(np.max(vals)) if vals.size else 0.0
    if top == 0.0:
        return 0.0

    def excess(t):
        return _lorentz_from_samples(phi(vals / t), mass, params, lambda_quadrature) - 1.0

    lo = hi = top
    for _ in range(400):
        if excess(lo) > 0:
            break
        lo /= 2.0
    else:
        raise ArithmeticError("Luxemburg bracket failure (lower end)")
    for _ in range(400):
        if excess(hi) <= 0:
            break
        hi *= 2.0
    else:
        raise ArithmeticError("Luxemburg bracket failure (upper end)")
    a, b = math.log(lo), math.log(hi)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if excess(math.exp(mid)) > 0:
            a = mid
        else:
            b = mid
    return math.exp(b)


def estimate_fund_constant(p: float, epsilon: float, samples: int = 10_000, seed: int = 0) -> float:
    """Empirical C(p, eps) in |g1 - g2|^p <= eps|g1|^p + C (|g1| + |g2|)^(p-2) |g1 - g2|^2."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    rng = np.random.default_rng(seed)
    r1 = np.ones(samples)
    r2 = 10.0 ** rng.uniform(-6.0, 6.0, samples)
    t1 = rng.uniform(0, 2 * np.pi, samples)
    t2 = rng.uniform(0, 2 * np.pi, samples)
    g1 = np.stack([r1 * np.cos(t1), r1 * np.sin(t1)], axis=1)
    g2 = np.stack([r2 * np.cos(t2), r2 * np.sin(t2)], axis=1)
    # randomise which vector is the small one
    swap = rng.random(samples) < 0.5
    g1[swap], g2[swap] = g2[swap].copy(), g1[swap].copy()
    d = np.hypot(*(g1 - g2).T)
    keep = d > 0
    n1 = np.hypot(*g1.T)[keep]
    n2 = np.hypot(*g2.T)[keep]
    d = d[keep]
    num = d ** p - epsilon * n1 ** p
    den = (n1 + n2) ** (p - 2) * d ** 2
    return float(max(0.0, np.max(num / den)))
