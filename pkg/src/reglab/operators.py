"""Fractional maximal operator, Riesz potential and weighted distribution functions.

Fields are extended by zero off the grid, so ball averages always divide by the
full lattice-disk count, never by the clipped one.
"""

from __future__ import annotations

import math

import numpy as np

from .fields import ScalarField
from .geometry import Ball, Domain, Grid, cells_in_ball, lattice_disk, lattice_disk_count
from .weights import Weight

N_DIM = 2


def dyadic_radii(grid: Grid) -> list[float]:
    """2h, 4h, ... up to the first radius covering the grid diagonal."""
    radii = [2 * grid.h]
    while radii[-1] < grid.diagonal:
        radii.append(2 * radii[-1])
    return radii


def _check_alpha(alpha: float) -> None:
    if not 0 <= alpha < N_DIM:
        raise ValueError(f"alpha must lie in [0, 2), got {alpha}")


def _disk_sums(f: np.ndarray, radius_cells: float) -> np.ndarray:
    """Sum of f over the closed lattice disk around every node (zero extension)."""
    n_rows, n_cols = f.shape
    disk = lattice_disk(radius_cells)
    R = max(dj for dj, _ in disk)
    W = min(R, n_cols)
    # row-wise prefix sums, padded so that any half-width fits
    padded = np.zeros((n_rows, n_cols + 2 * W + 1))
    padded[:, W + 1:W + 1 + n_cols] = f
    csum = np.cumsum(padded, axis=1)
    cols = np.arange(n_cols)
    out = np.zeros_like(f)
    for dj, w in disk:
        lo_r, hi_r = max(0, -dj), min(n_rows, n_rows - dj)
        if lo_r >= hi_r:
            continue
        w = min(w, n_cols)
        src = csum[lo_r + dj:hi_r + dj]
        out[lo_r:hi_r] += src[:, cols + W + 1 + w] - src[:, cols + W - w]
    return out


def frac_maximal(field: ScalarField, alpha: float = 0.0, radii=None, mode: str = "fast") -> ScalarField:
    """M_alpha f(y) = max over the radius family of rho**alpha times the mean of |f| on B_rho(y)."""
    _check_alpha(alpha)
    grid = field.grid
    radii = dyadic_radii(grid) if radii is None else list(radii)
    f = np.abs(field.values)
    h = grid.h
    if mode == "fast":
        out = np.zeros_like(f)
        for rho in radii:
            avg = _disk_sums(f, rho / h) / lattice_disk_count(rho / h)
            np.maximum(out, rho ** alpha * avg, out=out)
        return ScalarField(grid, out)
    if mode == "brute":
        return ScalarField(grid, _frac_maximal_brute(grid, f, alpha, radii))
    raise ValueError(f"unknown mode {mode!r}")


def _frac_maximal_brute(grid: Grid, f: np.ndarray, alpha: float, radii) -> np.ndarray:
    J, I = np.indices(grid.shape)
    out = np.zeros_like(f)
    counts = [lattice_disk_count(r / grid.h) for r in radii]
    for j in range(grid.shape[0]):
        for i in range(grid.shape[1]):
            d2 = (J - j) ** 2 + (I - i) ** 2
            best = 0.0
            for rho, cnt in zip(radii, counts):
                R2 = (rho / grid.h) ** 2 * (1 + 1e-9)
                best = max(best, rho ** alpha * f[d2 <= R2].sum() / cnt)
            out[j, i] = best
    return out


def maximal_at(field: ScalarField, alpha: float, node: tuple[int, int], radii,
               min_radius: float = 0.0) -> float:
    """sup over radii >= min_radius of r**alpha times the mean of |f| on B_r(node)."""
    grid = field.grid
    J, I = np.indices(grid.shape)
    d2 = (J - node[0]) ** 2 + (I - node[1]) ** 2
    f = np.abs(field.values)
    best = 0.0
    for rho in radii:
        if rho < min_radius * (1 - 1e-12):
            continue
        R2 = (rho / grid.h) ** 2 * (1 + 1e-9)
        best = max(best, rho ** alpha * f[d2 <= R2].sum() / lattice_disk_count(rho / grid.h))
    return best


def _riesz_kernel(beta: float, grid: Grid, tx, ty, sx, sy) -> np.ndarray:
    d = np.hypot(tx[:, None] - sx[None, :], ty[:, None] - sy[None, :])
    return np.maximum(d, 0.5 * grid.h) ** (beta - N_DIM)


def _check_beta(beta: float) -> None:
    if not 0 < beta < N_DIM:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")


def riesz_at(field: ScalarField, beta: float, points) -> np.ndarray:
    """I_beta f at arbitrary points of R^2 (the field is zero off the grid)."""
    _check_beta(beta)
    grid = field.grid
    X, Y = grid.coords()
    nz = field.values != 0
    sx, sy, fv = X[nz], Y[nz], field.values[nz] * grid.h ** 2
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts))
    chunk = 256
    for k in range(0, len(pts), chunk):
        tx, ty = pts[k:k + chunk, 0], pts[k:k + chunk, 1]
        out[k:k + chunk] = (_riesz_kernel(beta, grid, tx, ty, sx, sy) * fv[None, :]).sum(axis=1)
    return out


def riesz_potential(field: ScalarField, beta: float) -> ScalarField:
    """I_beta f on every node by direct summation (self cell mollified at h/2)."""
    X, Y = field.grid.coords()
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    return ScalarField(field.grid, riesz_at(field, beta, pts).reshape(field.grid.shape))


def _region_mask(field_grid: Grid, domain: Domain | None, localize: Ball | None) -> np.ndarray:
    mask = np.ones(field_grid.shape, dtype=bool) if domain is None else domain.closure_mask.copy()
    if localize is not None:
        mask &= cells_in_ball(field_grid, localize)
    return mask


def distribution(field: ScalarField, weight: Weight, lam: float, localize: Ball | None = None,
                 domain: Domain | None = None) -> float:
    """D^omega_f(lambda; B) = omega({x in Omega cap B : |f(x)| > lambda})."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    mask = _region_mask(field.grid, domain, localize) & (np.abs(field.values) > lam)
    w = weight.values * field.grid.quad_weights()
    return float(np.sum(w[mask]))


def distribution_curve(values: np.ndarray, node_mass: np.ndarray, lams) -> np.ndarray:
    """Vectorised D(lambda) for many levels from precomputed node masses."""
    v = np.abs(values).ravel()
    m = node_mass.ravel()
    order = np.argsort(v, kind="stable")
    vs, ms = v[order], m[order]
    tail = np.concatenate([np.cumsum(ms[::-1])[::-1], [0.0]])
    idx = np.searchsorted(vs, np.asarray(lams, dtype=float), side="right")
    return tail[idx]


def lebesgue_measure_above(field: ScalarField, lam: float) -> float:
    mask = np.abs(field.values) > lam
    return float(np.sum(field.grid.quad_weights()[mask]))


def weak_type_check(field: ScalarField, alpha: float, s: float, lam: float,
                    radii=None) -> tuple[float, float]:
    """Both sides of |{M_alpha f > lambda}| <= (C lambda^-s int |f|^s)^(n/(n - alpha s))."""
    _check_alpha(alpha)
    if s < 1:
        raise ValueError("s must be >= 1")
    if alpha * s >= N_DIM:
        raise ValueError("alpha * s must be < 2")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    M = frac_maximal(field, alpha, radii)
    lhs = lebesgue_measure_above(M, lam)
    integral = float(np.sum(np.abs(field.values) ** s * field.grid.quad_weights()))
    rhs_base = (integral / lam ** s) ** (N_DIM / (N_DIM - alpha * s))
    return lhs, rhs_base


def localization_check(field: ScalarField, alpha: float, xi2, zeta, rho: float,
                       radii=None) -> tuple[float, float]:
    """restricted sup over r >= rho at zeta versus 3^(n - alpha) M_alpha f(xi2).

    Points are snapped to nodes. The maximal function at xi2 is taken over the
    radius family together with its triples, since B_r(zeta) is contained in
    B_3r(xi2) and 3r is the radius the bound actually uses.
    """
    _check_alpha(alpha)
    grid = field.grid
    radii = dyadic_radii(grid) if radii is None else list(radii)
    a = grid.nearest_node(xi2)
    z = grid.nearest_node(zeta)
    dist = math.hypot(a[0] - z[0], a[1] - z[1]) * grid.h
    if not dist < rho:
        raise ValueError("localization_check needs |zeta - xi2| < rho")
    restricted = maximal_at(field, alpha, z, radii, min_radius=rho)
    extended = sorted(set(radii) | {3 * r for r in radii})
    bound = 3.0 ** (N_DIM - alpha) * maximal_at(field, alpha, a, extended)
    return restricted, bound
