"""Muckenhoupt weights, A_p / A_inf estimators and the partial BMO seminorm."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .geometry import Ball, Grid, cells_in_ball, dyadic_scales, lattice_disk


@dataclass
class Weight:
    grid: Grid
    values: np.ndarray
    kind: str = "constant"
    center: tuple[float, float] | None = None
    gamma: float = 0.0
    a_inf: tuple[float, float] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape or not np.all(self.values > 0):
            raise ValueError("weight values must be positive on every node")


def constant_weight(grid: Grid, c: float = 1.0) -> Weight:
    return Weight(grid, np.full(grid.shape, float(c)), "constant", None, 0.0)


def power_weight(grid: Grid, center=(0.5, 0.5), gamma: float = 0.0) -> Weight:
    """|x - center|**gamma, mollified at distance h/2 from the centre."""
    if not abs(gamma) < 4:
        raise ValueError(f"|gamma| must be < 4, got {gamma}")
    X, Y = grid.coords()
    r = np.maximum(np.hypot(X - center[0], Y - center[1]), 0.5 * grid.h)
    return Weight(grid, r ** gamma, "power", (float(center[0]), float(center[1])), float(gamma))


def weighted_measure(weight: Weight, cells: np.ndarray) -> float:
    """omega(K) with trapezoid node weights (interior nodes carry h**2)."""
    w = weight.values * weight.grid.quad_weights()
    return float(np.sum(w[np.asarray(cells, dtype=bool)]))


def ball_family(grid: Grid, centers, radii) -> list[Ball]:
    return [Ball((float(c[0]), float(c[1])), float(r)) for c in centers for r in radii]


def dyadic_ball_family(grid: Grid, centers, rmax: float | None = None) -> list[Ball]:
    """Balls of radii rmax, rmax/2, ... >= 4h around the given centres."""
    rmax = grid.extent / 2 if rmax is None else rmax
    return ball_family(grid, centers, dyadic_scales(rmax, 4 * grid.h))


def _check_family(grid: Grid, balls) -> None:
    if not balls:
        raise ValueError("ball family is empty")
    for b in balls:
        if b.radius < 4 * grid.h * (1 - 1e-12):
            raise ValueError(f"ball radius {b.radius} below 4h")


def estimate_Ap(weight: Weight, p: float, balls: list[Ball]) -> float:
    if not p > 1:
        raise ValueError("p must exceed 1")
    _check_family(weight.grid, balls)
    best = 0.0
    for b in balls:
        m = cells_in_ball(weight.grid, b)
        if not m.any():
            continue
        w = weight.values[m]
        prod = w.mean() * np.mean(w ** (-1.0 / (p - 1))) ** (p - 1)
        best = max(best, float(prod))
    return best


def _random_subset(grid: Grid, ball: Ball, rng: np.random.Generator, X, Y) -> np.ndarray:
    k = int(rng.integers(1, 5))
    K = np.zeros(grid.shape, dtype=bool)
    for _ in range(k):
        rad = ball.radius * math.sqrt(rng.random())
        ang = 2 * math.pi * rng.random()
        cx = ball.center[0] + rad * math.cos(ang)
        cy = ball.center[1] + rad * math.sin(ang)
        r = grid.h + (ball.radius / 2 - grid.h) * rng.random()
        K |= (X - cx) ** 2 + (Y - cy) ** 2 <= r * r
    return K


def ainf_samples(weight: Weight, balls: list[Ball], subsets_per_ball: int, seed: int):
    """Pairs (|K|/|B|, omega(K)/omega(B)) for seeded unions of sub-balls K of B."""
    grid = weight.grid
    rng = np.random.default_rng(seed)
    X, Y = grid.coords()
    ratios, masses = [], []
    for b in balls:
        B = cells_in_ball(grid, b)
        nB = int(B.sum())
        if nB == 0:
            continue
        wB = float(weight.values[B].sum())
        for _ in range(subsets_per_ball):
            K = _random_subset(grid, b, rng, X, Y) & B
            nK = int(K.sum())
            if nK == 0:
                continue
            ratios.append(nK / nB)
            masses.append(float(weight.values[K].sum()) / wB)
    return np.array(ratios), np.array(masses)


def fit_ainf_envelope(ratios: np.ndarray, masses: np.ndarray) -> tuple[float, float]:
    """Tightest line log c0 + nu log r above every sample (c0 >= 1, 0 < nu <= 1).

    Minimises the total log-gap, which favours the largest nu that does not
    force a large c0.
    """
    keep = ratios < 1.0
    if not keep.any():
        raise ValueError("degenerate A_inf fit: every subset has full measure")
    lr = np.log(ratios[keep])
    lw = np.log(masses[keep])
    # variables (nu, L = log c0); constraint  -nu*lr - L <= -lw
    A = np.stack([-lr, -np.ones_like(lr)], axis=1)
    res = linprog(c=[lr.sum(), float(len(lr))], A_ub=A, b_ub=-lw,
                  bounds=[(1e-6, 1.0), (0.0, None)], method="highs")
    if not res.success:
        raise ValueError(f"A_inf envelope fit failed: {res.message}")
    nu = float(res.x[0])
    # re-tighten c0 for the chosen slope (LP tolerance)
    L = max(0.0, float(np.max(lw - nu * lr)))
    return math.exp(L), nu


def extremal_samples(weight: Weight, balls: list[Ball]):
    """For every cardinality k the heaviest k nodes of B maximise omega(K)/omega(B)."""
    ratios, masses = [], []
    for b in balls:
        w = np.sort(weight.values[cells_in_ball(weight.grid, b)])[::-1]
        if w.size < 2:
            continue
        k = np.arange(1, w.size + 1)
        ratios.append(k / w.size)
        masses.append(np.cumsum(w) / w.sum())
    if not ratios:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(ratios), np.concatenate(masses)


def estimate_Ainf(weight: Weight, balls: list[Ball], subsets_per_ball: int = 32,
                  seed: int = 0) -> tuple[float, float]:
    """Fit (c0, nu) over random sub-ball unions plus the extremal subsets of each ball."""
    if subsets_per_ball < 16:
        raise ValueError("subsets_per_ball must be >= 16")
    _check_family(weight.grid, balls)
    r1, m1 = ainf_samples(weight, balls, subsets_per_ball, seed)
    r2, m2 = extremal_samples(weight, balls)
    c0, nu = fit_ainf_envelope(np.concatenate([r1, r2]), np.concatenate([m1, m2]))
    weight.a_inf = (c0, nu)
    return c0, nu


@dataclass
class CoefficientField:
    """A(x, xi) = a(x)|xi|^(p-2) xi and B(x, z) = b(x)|z|^(p-2) z on the nodes.

    x_1 (the column coordinate) is the variable in which ``a`` may be merely
    measurable.
    """

    grid: Grid
    a: np.ndarray
    b: np.ndarray
    p: float
    L: float = 0.0
    measurable_axis: int = 0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.grid.shape or self.b.shape != self.grid.shape:
            raise ValueError("coefficient arrays must match the grid")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not np.all(self.a > 0):
            raise ValueError("a must be positive")
        Lmin = max(1.0, float(self.a.max()), float(1.0 / self.a.min()), float(np.abs(self.b).max()))
        if self.L == 0.0:
            self.L = Lmin
        elif self.L < Lmin:
            raise ValueError(f"L = {self.L} violates the structure bounds (needs >= {Lmin})")


def coefficient_field(grid: Grid, p: float, a=None, b=None) -> CoefficientField:
    """Sample callables ``a(x1, x2)``/``b(x1, x2)`` (or constants) on the nodes."""
    X, Y = grid.coords()

    def sample(f, default):
        if f is None:
            return np.full(grid.shape, default)
        if callable(f):
            return np.broadcast_to(f(X, Y), grid.shape).astype(float)
        return np.broadcast_to(np.asarray(f, dtype=float), grid.shape).copy()

    return CoefficientField(grid, sample(a, 1.0), sample(b, 1.0), float(p))


def _centred_columns(a: np.ndarray) -> np.ndarray:
    # subtracting a per-column constant leaves every |a - slice mean| unchanged
    # and makes x2-independent columns exactly zero
    return a - a[0:1, :]


def _slice_means(ac: np.ndarray, half: int) -> np.ndarray:
    """M[jc, c] = mean of ac[jc-half .. jc+half, c] clipped to the grid."""
    n1 = ac.shape[0]
    P = np.vstack([np.zeros((1, ac.shape[1])), np.cumsum(ac, axis=0)])
    lo = np.clip(np.arange(n1) - half, 0, n1)
    hi = np.clip(np.arange(n1) + half + 1, 0, n1)
    return (P[hi] - P[lo]) / (hi - lo)[:, None]


def partial_bmo_seminorm(coeff: CoefficientField, r0: float, probe_directions: int = 8) -> float:
    """[A]^{1,r0}: sup over node centres y and dyadic rho <= r0 of the ball mean of theta_1.

    For the family a(x)|xi|^(p-2) xi the ratio inside theta_1 equals
    |a(x) - abar(x1)| for every direction xi, where abar is the mean of ``a``
    over the x2-interval [y2 - rho, y2 + rho] at fixed x1.
    """
    grid = coeff.grid
    h = grid.h
    if r0 < 4 * h * (1 - 1e-12):
        raise ValueError(f"r0 = {r0} is below the resolvable scale 4h")
    if probe_directions < 8:
        raise ValueError("probe_directions must be >= 8")
    ac = _centred_columns(coeff.a)
    n1 = grid.shape[0]
    best = 0.0
    for rho in dyadic_scales(r0, 2 * h):
        disk = lattice_disk(rho / h)
        half = max(dj for dj, _ in disk)
        M = _slice_means(ac, half)
        for jc in range(n1):
            theta = np.abs(M[jc][None, :] - ac)  # theta for centre row jc, all nodes
            csum = np.hstack([np.zeros((n1, 1)), np.cumsum(theta, axis=1)])
            total = np.zeros(n1)
            count = np.zeros(n1)
            cols = np.arange(n1)
            for dj, w in disk:
                r = jc + dj
                if r < 0 or r >= n1:
                    continue
                lo = np.clip(cols - w, 0, n1)
                hi = np.clip(cols + w + 1, 0, n1)
                total += csum[r, hi] - csum[r, lo]
                count += hi - lo
            best = max(best, float(np.max(total / count)))
    return best
