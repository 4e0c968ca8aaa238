"""P1 finite elements and projected-gradient descent for the double-obstacle problem.

Each grid square [i, i+1] x [j, j+1] is split along its anti-diagonal into a
"lower" triangle (j,i),(j,i+1),(j+1,i) and an "upper" triangle
(j,i+1),(j+1,i+1),(j+1,i). Per-triangle arrays have shape (n, n) and are
indexed [j, i]. For p = 2 and a = 1 the assembled stiffness is the 5-point
Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .fields import ScalarField, VectorField
from .geometry import Domain
from .weights import CoefficientField


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 20000
    mu: float = 1e-8
    mu_start: float = 1e-2
    mu_stages: int = 4
    armijo_factor: float = 0.5
    armijo_slope: float = 1e-4

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")

    def mu_schedule(self, p: float) -> list[float]:
        if p == 2 or self.mu_stages <= 1 or self.mu_start <= self.mu:
            return [self.mu]
        return list(np.geomspace(self.mu_start, self.mu, self.mu_stages))


# ----------------------------------------------------------------------------
# P1 kinematics


def triangle_gradients(u: np.ndarray, h: float):
    """Return ((gx_lo, gy_lo), (gx_up, gy_up)) for nodal values u."""
    lo = ((u[:-1, 1:] - u[:-1, :-1]) / h, (u[1:, :-1] - u[:-1, :-1]) / h)
    up = ((u[1:, 1:] - u[1:, :-1]) / h, (u[1:, 1:] - u[:-1, 1:]) / h)
    return lo, up


def scatter_flux(flux_lo, flux_up, h: float, shape) -> np.ndarray:
    """Adjoint of triangle_gradients: sum_T flux_T . d(grad u_T)/du_i."""
    qx, qy = flux_lo
    out = np.zeros(shape)
    out[:-1, 1:] += qx / h
    out[:-1, :-1] -= (qx + qy) / h
    out[1:, :-1] += qy / h
    qx, qy = flux_up
    out[1:, 1:] += (qx + qy) / h
    out[1:, :-1] -= qx / h
    out[:-1, 1:] -= qy / h
    return out


def triangle_average(nodal: np.ndarray):
    """Vertex means of a nodal array on lower and upper triangles."""
    lo = (nodal[:-1, :-1] + nodal[:-1, 1:] + nodal[1:, :-1]) / 3.0
    up = (nodal[:-1, 1:] + nodal[1:, 1:] + nodal[1:, :-1]) / 3.0
    return lo, up


def node_averaged_gradient(u: np.ndarray, h: float) -> np.ndarray:
    """Mean of the gradients of the triangles incident to each node, shape (..., 2)."""
    (gxl, gyl), (gxu, gyu) = triangle_gradients(u, h)
    shape = u.shape
    acc = np.zeros(shape + (2,))
    cnt = np.zeros(shape)
    lo = np.stack([gxl, gyl], axis=-1)
    up = np.stack([gxu, gyu], axis=-1)
    for sl in [(slice(None, -1), slice(None, -1)), (slice(None, -1), slice(1, None)),
               (slice(1, None), slice(None, -1))]:
        acc[sl] += lo
        cnt[sl] += 1
    for sl in [(slice(None, -1), slice(1, None)), (slice(1, None), slice(1, None)),
               (slice(1, None), slice(None, -1))]:
        acc[sl] += up
        cnt[sl] += 1
    return acc / cnt[..., None]


def flux(a_T, gx, gy, p: float, mu: float):
    """A_mu(x, xi) = a (|xi|^2 + mu^2)^((p-2)/2) xi on one triangle family."""
    s = a_T * (gx * gx + gy * gy + mu * mu) ** ((p - 2) / 2)
    return s * gx, s * gy


def _energy_density_diff(G1sq, G0sq, dot_sum_diff, p: float, mu: float):
    """((|G1|^2+mu^2)^(p/2) - (|G0|^2+mu^2)^(p/2)) / p, evaluated without cancellation."""
    B = G0sq + mu * mu
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(B > 0, dot_sum_diff / B, 0.0)
        d = np.where(B > 0, B ** (p / 2) * np.expm1((p / 2) * np.log1p(ratio)) / p,
                     G1sq ** (p / 2) / p)
    return d


# ----------------------------------------------------------------------------
# problem description


@dataclass
class ProblemSpec:
    domain: Domain
    p: float
    coeff: CoefficientField
    F: VectorField
    g: ScalarField
    psi1: ScalarField
    psi2: ScalarField

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.coeff.p != self.p:
            raise ValueError("coefficient field was built for a different p")
        if np.any(self.psi1.values > self.psi2.values):
            raise ValueError("psi1 <= psi2 violated")
        bnd = ~self.domain.interior_mask
        if np.any(self.psi1.values[bnd] > 0) or np.any(self.psi2.values[bnd] < 0):
            raise ValueError("psi1 <= 0 <= psi2 violated on the boundary")

    @property
    def grid(self):
        return self.domain.grid

    def datum_power(self) -> np.ndarray:
        """|F_data|^p = |grad psi1|^p + |grad psi2|^p + |F|^p + |g|^(p/(p-1)), nodewise."""
        p, h = self.p, self.grid.h
        d1 = node_averaged_gradient(self.psi1.values, h)
        d2 = node_averaged_gradient(self.psi2.values, h)
        return (np.hypot(d1[..., 0], d1[..., 1]) ** p + np.hypot(d2[..., 0], d2[..., 1]) ** p
                + self.F.magnitude() ** p + np.abs(self.g.values) ** (p / (p - 1)))

    def datum(self) -> ScalarField:
        return ScalarField(self.grid, self.datum_power() ** (1.0 / self.p))


@dataclass
class DiscreteProblem:
    """Per-triangle data of the energy

    J(u) = sum_T |T| [a_T ((|grad u|^2 + mu^2)^(p/2) - mu^p)/p - c_T . grad u] - sum_i h^2 g_i u_i
    with c_T = b_T (|F_T|^2 + mu^2)^((p-2)/2) F_T.
    """

    spec: ProblemSpec
    a_T: tuple
    b_T: tuple
    F_T: tuple
    g: np.ndarray

    @property
    def grid(self):
        return self.spec.grid

    @property
    def p(self):
        return self.spec.p


def assemble(problem: ProblemSpec) -> DiscreteProblem:
    a_T = triangle_average(problem.coeff.a)
    b_T = triangle_average(problem.coeff.b)
    Fx = triangle_average(problem.F.values[..., 0])
    Fy = triangle_average(problem.F.values[..., 1])
    F_T = ((Fx[0], Fy[0]), (Fx[1], Fy[1]))
    return DiscreteProblem(problem, a_T, b_T, F_T, problem.g.values.copy())


@dataclass
class Solution:
    u: ScalarField
    grad_u: VectorField
    iterations: int
    kkt_residual: float
    energy_trace: list
    active_lower: np.ndarray
    active_upper: np.ndarray
    converged: bool = True
    mu: float = 0.0
    stage_traces: list = field(default_factory=list)
    tri_grad: tuple = field(default=None, repr=False)


# ----------------------------------------------------------------------------
# generic constrained minimisation over a node subset


@dataclass
class _Objective:
    """Energy restricted to ``free`` nodes; everything else is pinned to ``fixed``."""

    h: float
    p: float
    a_T: tuple
    c_T: tuple                # linear flux coupling per triangle family
    g: np.ndarray | None      # nodal load (h^2 g_i u_i) or None
    free: np.ndarray
    fixed: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mu: float

    def project(self, u: np.ndarray) -> np.ndarray:
        v = np.clip(u, self.lower, self.upper)
        return np.where(self.free, v, self.fixed)

    def energy(self, u: np.ndarray) -> float:
        lo, up = triangle_gradients(u, self.h)
        area = 0.5 * self.h * self.h
        total = 0.0
        for (gx, gy), a, (cx, cy) in zip((lo, up), self.a_T, self.c_T):
            G2 = gx * gx + gy * gy
            dens = _energy_density_diff(G2, np.zeros_like(G2), G2, self.p, self.mu)
            total += area * float(np.sum(a * dens - (cx * gx + cy * gy)))
        if self.g is not None:
            total -= self.h ** 2 * float(np.sum(self.g * u))
        return total

    def energy_diff(self, u1: np.ndarray, u0: np.ndarray) -> float:
        """J(u1) - J(u0) computed from differences (no catastrophic cancellation)."""
        t1 = triangle_gradients(u1, self.h)
        t0 = triangle_gradients(u0, self.h)
        area = 0.5 * self.h * self.h
        total = 0.0
        for (g1x, g1y), (g0x, g0y), a, (cx, cy) in zip(t1, t0, self.a_T, self.c_T):
            dx, dy = g1x - g0x, g1y - g0y
            dot = dx * (g1x + g0x) + dy * (g1y + g0y)
            dens = _energy_density_diff(g1x * g1x + g1y * g1y, g0x * g0x + g0y * g0y, dot,
                                        self.p, self.mu)
            total += area * float(np.sum(a * dens - (cx * dx + cy * dy)))
        if self.g is not None:
            total -= self.h ** 2 * float(np.sum(self.g * (u1 - u0)))
        return total

    def gradient(self, u: np.ndarray) -> np.ndarray:
        lo, up = triangle_gradients(u, self.h)
        area = 0.5 * self.h * self.h
        fl = []
        for (gx, gy), a, (cx, cy) in zip((lo, up), self.a_T, self.c_T):
            fx, fy = flux(a, gx, gy, self.p, self.mu)
            fl.append((area * (fx - cx), area * (fy - cy)))
        grad = scatter_flux(fl[0], fl[1], self.h, u.shape)
        if self.g is not None:
            grad -= self.h ** 2 * self.g
        return np.where(self.free, grad, 0.0)

    def residual(self, u: np.ndarray, grad: np.ndarray | None = None) -> float:
        tau = self.h * self.h
        grad = self.gradient(u) if grad is None else grad
        return float(np.linalg.norm(u - self.project(u - tau * grad)) / tau)


def _descend(obj: _Objective, u: np.ndarray, tol: float, max_iter: int, cfg: SolverConfig):
    """Projected gradient with Barzilai-Borwein trial steps and Armijo backtracking."""
    u = obj.project(u)
    J = obj.energy(u)
    trace = [J]
    grad = obj.gradient(u)
    res = obj.residual(u, grad)
    step = 1.0 / 8.0
    it = 0
    while res > tol and it < max_iter:
        t = step
        accepted = False
        for _ in range(80):
            trial = obj.project(u - t * grad)
            dJ = obj.energy_diff(trial, u)
            slope = float(np.sum(grad * (trial - u)))
            if dJ <= cfg.armijo_slope * slope:
                accepted = True
                break
            t *= cfg.armijo_factor
        if not accepted or slope == 0.0:
            break  # no further decrease representable
        new_grad = obj.gradient(trial)
        s = trial - u
        y = new_grad - grad
        sy = float(np.sum(s * y))
        ss = float(np.sum(s * s))
        # alternate the two Barzilai-Borwein steps
        if sy > 0:
            step = ss / sy if it % 2 == 0 else sy / max(float(np.sum(y * y)), 1e-300)
        else:
            step = 1.0
        step = min(max(step, 1e-12), 1e12)
        u, grad = trial, new_grad
        J = J + dJ
        trace.append(J)
        res = obj.residual(u, grad)
        it += 1
    return u, it, res, trace


def _free_in_region(domain: Domain, region: np.ndarray) -> np.ndarray:
    """Region nodes whose four neighbours are also region nodes (and inside Omega)."""
    r = np.asarray(region, dtype=bool) & domain.closure_mask
    free = np.zeros_like(r)
    free[1:-1, 1:-1] = r[1:-1, 1:-1] & r[:-2, 1:-1] & r[2:, 1:-1] & r[1:-1, :-2] & r[1:-1, 2:]
    return free & domain.interior_mask


def _coupling(dp: DiscreteProblem, mu: float, data=None) -> tuple:
    """c_T = b (|F|^2 + mu^2)^((p-2)/2) F  (the B(x, F) term)."""
    out = []
    for b, (Fx, Fy) in zip(dp.b_T, dp.F_T):
        s = b * (Fx * Fx + Fy * Fy + mu * mu) ** ((dp.p - 2) / 2)
        out.append((s * Fx, s * Fy))
    return tuple(out)


def _psi_flux(dp: DiscreteProblem, psi: np.ndarray, a_T, mu: float) -> tuple:
    lo, up = triangle_gradients(psi, dp.grid.h)
    return tuple(flux(a, gx, gy, dp.p, mu) for (gx, gy), a in zip((lo, up), a_T))


def _zero_coupling(shape) -> tuple:
    z = np.zeros(shape)
    return ((z, z), (z, z))


def _run(dp: DiscreteProblem, make_obj, u0: np.ndarray, config: SolverConfig,
         lower: np.ndarray, upper: np.ndarray) -> Solution:
    schedule = config.mu_schedule(dp.p)
    u = u0
    if len(schedule) > 1:
        final = make_obj(schedule[-1])
        if final.residual(final.project(u0)) <= config.tol:
            schedule = schedule[-1:]  # warm start already optimal: skip the continuation detour
    total_it = 0
    stage_traces = []
    res = math.inf
    for k, mu in enumerate(schedule):
        obj = make_obj(mu)
        last = k == len(schedule) - 1
        tol = config.tol if last else config.tol * 100
        u, it, res, trace = _descend(obj, u, tol, config.max_iter - total_it, config)
        total_it += it
        stage_traces.append(trace)
    h = dp.grid.h
    grid = dp.grid
    grad = node_averaged_gradient(u, h)
    closure = dp.spec.domain.closure_mask
    grad = np.where(closure[..., None], grad, 0.0)
    return Solution(
        u=ScalarField(grid, u),
        grad_u=VectorField(grid, grad),
        iterations=total_it,
        kkt_residual=res,
        energy_trace=stage_traces[-1],
        active_lower=obj.free & (u <= lower),
        active_upper=obj.free & (u >= upper),
        converged=res <= config.tol,
        mu=schedule[-1],
        stage_traces=stage_traces,
        tri_grad=triangle_gradients(u, h),
    )


def _objective_for_problem(dp: DiscreteProblem, mu: float) -> _Objective:
    dom = dp.spec.domain
    return _Objective(dp.grid.h, dp.p, dp.a_T, _coupling(dp, mu), dp.g, dom.interior_mask.copy(),
                      np.zeros(dp.grid.shape), dp.spec.psi1.values, dp.spec.psi2.values, mu)


def solve_double_obstacle(dp: DiscreteProblem, config: SolverConfig | None = None) -> Solution:
    config = config or SolverConfig()
    u0 = np.zeros(dp.grid.shape)
    return _run(dp, lambda mu: _objective_for_problem(dp, mu), u0, config,
                dp.spec.psi1.values, dp.spec.psi2.values)


def kkt_residual(solution: Solution, dp: DiscreteProblem) -> float:
    """||u - Proj_K(u - h^2 grad J(u))||_2 / h^2 at the solution's final mu."""
    obj = _objective_for_problem(dp, solution.mu)
    return obj.residual(solution.u.values)


def _regional(dp: DiscreteProblem, region, boundary_data, lower, upper, a_T, coupling_fn,
              config: SolverConfig | None) -> Solution:
    config = config or SolverConfig()
    dom = dp.spec.domain
    free = _free_in_region(dom, region)
    if not free.any():
        raise ValueError("region has no free nodes")
    fixed = np.asarray(boundary_data.values if isinstance(boundary_data, ScalarField)
                       else boundary_data, dtype=float)
    shape = dp.grid.shape
    lower = np.full(shape, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(shape, np.inf) if upper is None else np.asarray(upper, dtype=float)
    if np.any(fixed[~free] < lower[~free] - 1e-14):
        raise ValueError("boundary data below the obstacle on the region boundary")

    def make(mu):
        return _Objective(dp.grid.h, dp.p, a_T, coupling_fn(mu), None, free, fixed,
                          lower, upper, mu)

    u0 = np.where(free, np.clip(fixed, lower, upper), fixed)
    return _run(dp, make, u0, config, lower, upper)


def solve_one_obstacle(dp: DiscreteProblem, region, boundary_data, lower,
                       rhs_mode: str = "div_A_psi2", config: SolverConfig | None = None) -> Solution:
    """u1 >= lower in the region, u1 = boundary_data elsewhere; right side div A(x, grad psi2)."""
    lower = lower.values if isinstance(lower, ScalarField) else lower
    if rhs_mode == "div_A_psi2":
        psi2 = dp.spec.psi2.values
        coupling = lambda mu: _psi_flux(dp, psi2, dp.a_T, mu)  # noqa: E731
    elif rhs_mode == "zero":
        coupling = lambda mu: _zero_coupling(dp.a_T[0].shape)  # noqa: E731
    else:
        raise ValueError(f"unknown rhs_mode {rhs_mode!r}")
    return _regional(dp, region, boundary_data, lower, None, dp.a_T, coupling, config)


def solve_dirichlet(dp: DiscreteProblem, region, boundary_data, rhs: str = "zero",
                    config: SolverConfig | None = None, a_T=None) -> Solution:
    """Unconstrained: rhs 'zero' gives L(v) = 0, 'div_A_psi1' gives L(u2) = L(psi1)."""
    a_T = dp.a_T if a_T is None else a_T
    if rhs == "zero":
        coupling = lambda mu: _zero_coupling(a_T[0].shape)  # noqa: E731
    elif rhs == "div_A_psi1":
        psi1 = dp.spec.psi1.values
        coupling = lambda mu: _psi_flux(dp, psi1, a_T, mu)  # noqa: E731
    else:
        raise ValueError(f"unknown rhs {rhs!r}")
    return _regional(dp, region, boundary_data, None, None, a_T, coupling, config)


def frozen_coefficient(a: np.ndarray, region: np.ndarray) -> np.ndarray:
    """Replace a(x1, x2) by its mean over the region's x2-extent at each fixed x1."""
    rows = np.flatnonzero(np.asarray(region, dtype=bool).any(axis=1))
    if rows.size < 3:
        raise ValueError("degenerate slice: region spans fewer than 3 node rows")
    lo, hi = rows[0], rows[-1] + 1
    ref = a[lo:lo + 1, :]
    abar = ref + np.mean(a[lo:hi, :] - ref, axis=0, keepdims=True)
    return np.broadcast_to(abar, a.shape).copy()


def solve_frozen(dp: DiscreteProblem, region, boundary_data,
                 config: SolverConfig | None = None) -> Solution:
    abar = frozen_coefficient(dp.spec.coeff.a, region)
    return solve_dirichlet(dp, region, boundary_data, "zero", config, a_T=triangle_average(abar))


def triangles_in_region(region: np.ndarray):
    """(lower, upper) boolean masks of triangles with all three vertices in the region."""
    r = np.asarray(region, dtype=bool)
    lo = r[:-1, :-1] & r[:-1, 1:] & r[1:, :-1]
    up = r[:-1, 1:] & r[1:, 1:] & r[1:, :-1]
    return lo, up


def region_mean_power(tri_grad, region: np.ndarray, p: float, other=None) -> float:
    """Mean over the region's triangles of |grad w|^p (or |grad w - grad other|^p)."""
    masks = triangles_in_region(region)
    total = 0.0
    count = 0
    for k, m in enumerate(masks):
        gx, gy = tri_grad[k]
        if other is not None:
            gx = gx - other[k][0]
            gy = gy - other[k][1]
        total += float(np.sum(np.hypot(gx, gy)[m] ** p))
        count += int(m.sum())
    if count == 0:
        raise ValueError("region contains no whole triangle")
    return total / count


def with_config(config: SolverConfig | None, **kw) -> SolverConfig:
    return replace(config or SolverConfig(), **kw)


def five_point_reference(domain: Domain, g: np.ndarray) -> np.ndarray:
    """Sparse direct solve of (4u_i - sum of neighbours)/h^2 = g_i on interior nodes, u = 0 elsewhere.

    This is the linear system the P1 energy reduces to for p = 2, a = 1, F = 0
    and inactive obstacles.
    """
    grid = domain.grid
    inner = domain.interior_mask
    idx = -np.ones(grid.shape, dtype=int)
    idx[inner] = np.arange(int(inner.sum()))
    rows, cols, vals = [], [], []
    J, I = np.nonzero(inner)
    k = idx[J, I]
    rows.append(k), cols.append(k), vals.append(np.full(k.size, 4.0))
    for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = idx[J + dj, I + di]
        ok = nb >= 0
        rows.append(k[ok]), cols.append(nb[ok]), vals.append(np.full(int(ok.sum()), -1.0))
    n = k.size
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    out = np.zeros(grid.shape)
    out[inner] = spsolve(A.tocsc(), grid.h ** 2 * np.asarray(g, dtype=float)[inner])
    return out


def energy_and_gradient(dp: DiscreteProblem, u, mu: float = 0.0):
    """J(u) and its gradient on interior nodes for the assembled double-obstacle energy."""
    u = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    obj = _objective_for_problem(dp, mu)
    return obj.energy(u), obj.gradient(u)
