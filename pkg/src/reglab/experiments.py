"""Instance suites and empirical checks of the level-set, norm and comparison estimates.

Every experiment is a deterministic function of (recipe, grid, config). Problem data
are continuous functions sampled on the nodes, so the same recipe at 32 and 64
cells describes the same continuous instance and refinement ratios make sense.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField, VectorField
from .geometry import Ball, build_grid, cells_in_ball, make_domain
from .io import csv_text, svg_lambda_plot
from .norms import LorentzParams, YoungFunction, lorentz_norm, luxemburg_norm
from .operators import (distribution_curve, dyadic_radii, frac_maximal, riesz_at,
                        weak_type_check)
from .solver import (ProblemSpec, Solution, SolverConfig, assemble, region_mean_power,
                     solve_dirichlet, solve_double_obstacle, solve_frozen, solve_one_obstacle)
from .weights import (Weight, coefficient_field, dyadic_ball_family, estimate_Ainf,
                      partial_bmo_seminorm, power_weight)

COLUMNS = ["instance_id", "grid", "p", "alpha", "gamma", "epsilon", "sigma", "lambda",
           "lhs", "rhs1", "rhs2", "C_emp", "verdict", "quantity", "value", "c0", "nu"]

WEIGHT_CENTER = (0.5, 0.55)
FIT_CENTERS = [(0.5, 0.55), (0.3, 0.7), (0.7, 0.45)]


# ----------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class Recipe:
    """Picklable description of one continuous test instance."""

    index: int
    p: float = 2.0
    gamma: float = 0.0
    alpha: float = 0.0
    domain: str = "square"          # square | reifenberg
    coeff: str = "const"            # const | laminate | oscillatory
    obstacles: str = "inactive"     # inactive | active | pinched
    forcing: str = "bump"           # none | poisson | unit | bump | local
    delta: float = 0.1
    r0: float = 0.25
    seed: int = 0

    @property
    def instance_id(self) -> str:
        return f"{self.index:02d}-{self.domain[:2]}-{self.coeff[:3]}-{self.obstacles[:3]}"


@dataclass
class Instance:
    recipe: Recipe
    problem: ProblemSpec
    weight: Weight

    @property
    def id(self) -> str:
        return self.recipe.instance_id


def coefficient_function(kind: str):
    if kind == "const":
        return 1.0
    if kind == "laminate":
        # measurable in x1 only; jumps fall between nodes at every grid used here
        return lambda X, Y: 1.0 + 0.5 * (X > 0.43) + 0.25 * (X > 0.71)
    if kind == "oscillatory":
        return lambda X, Y: 1.0 + 0.1 * np.sin(2 * np.pi * Y)
    raise ValueError(f"unknown coefficient kind {kind!r}")


def build_instance(recipe: Recipe, cells: int) -> Instance:
    grid = build_grid(cells)
    rough = recipe.domain == "reifenberg"
    domain = make_domain(grid, recipe.domain, delta=recipe.delta if rough else 0.0,
                         r0=recipe.r0 if rough else None, seed=recipe.seed)
    rng = np.random.default_rng(1000 * recipe.seed + recipe.index)
    cx, cy = rng.uniform(0.35, 0.65), rng.uniform(0.45, 0.7)
    theta = rng.uniform(0, 2 * np.pi)
    gx, gy = rng.uniform(0.3, 0.7), rng.uniform(0.45, 0.75)
    X, Y = grid.coords()

    if recipe.forcing in ("none", "poisson"):
        Fv = np.zeros(grid.shape + (2,))
        g = np.full(grid.shape, 1.0 if recipe.forcing == "poisson" else 0.0)
    else:
        bump = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * 0.12 ** 2))
        Fv = np.stack([bump * np.cos(theta), bump * np.sin(theta)], axis=-1)
        if recipe.forcing == "local":
            # narrow vector bump, no load: |grad u| decays like a dipole away from it
            narrow = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * 0.06 ** 2))
            Fv = np.stack([narrow * np.cos(theta), narrow * np.sin(theta)], axis=-1)
            g = np.zeros(grid.shape)
        elif recipe.forcing == "unit":
            g = np.ones(grid.shape)
        elif recipe.forcing == "bump":
            g = 0.5 + np.exp(-((X - gx) ** 2 + (Y - gy) ** 2) / (2 * 0.2 ** 2))
        else:
            raise ValueError(f"unknown forcing {recipe.forcing!r}")

    if recipe.obstacles == "inactive":
        psi1, psi2 = np.full(grid.shape, -10.0), np.full(grid.shape, 10.0)
    elif recipe.obstacles == "active":
        psi2 = 0.02 + 0.1 * ((X - cx) ** 2 + (Y - cy) ** 2)
        psi1 = -0.02 - 0.1 * ((X - gx) ** 2 + (Y - gy) ** 2)
    elif recipe.obstacles == "pinched":
        if recipe.domain != "square":
            raise ValueError("pinched obstacles are defined on the unit square only")
        psi1 = 0.05 * np.sin(np.pi * X) * np.sin(np.pi * Y) * (1 + 0.5 * X)
        psi1[~domain.interior_mask] = 0.0
        psi2 = psi1.copy()
    else:
        raise ValueError(f"unknown obstacle kind {recipe.obstacles!r}")

    coeff = coefficient_field(grid, recipe.p, a=coefficient_function(recipe.coeff))
    problem = ProblemSpec(domain, recipe.p, coeff, VectorField(grid, Fv), ScalarField(grid, g),
                          ScalarField(grid, psi1), ScalarField(grid, psi2))
    weight = power_weight(grid, WEIGHT_CENTER, recipe.gamma)
    return Instance(recipe, problem, weight)


def fit_weight(weight: Weight, seed: int = 0) -> tuple[float, float]:
    balls = dyadic_ball_family(weight.grid, FIT_CENTERS, rmax=0.25)
    return estimate_Ainf(weight, balls, seed=seed)


def good_lambda_suite(seed: int = 0) -> list[Recipe]:
    out = []
    for p in (2.0, 3.0):
        for gamma in (0.0, 1.0):
            out.append(Recipe(len(out), p=p, gamma=gamma, coeff="oscillatory",
                              obstacles="active", forcing="local", seed=seed))
    return out


def norm_ratio_suite(seed: int = 0, size: int = 10) -> list[Recipe]:
    """Random suite; every fifth instance has pinched obstacles on the square."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(size):
        p = float(rng.choice([1.8, 2.0, 3.0]))
        gamma = float(rng.choice([0.0, 1.0]))
        alpha = float(rng.choice([0.0, 0.5]))
        if k % 5 == 4:
            out.append(Recipe(k, p, gamma, alpha, "square", "const", "pinched", "bump", seed=seed))
            continue
        dom = str(rng.choice(["square", "reifenberg"]))
        coeff = str(rng.choice(["const", "laminate", "oscillatory"]))
        obst = str(rng.choice(["inactive", "active"]))
        out.append(Recipe(k, p, gamma, alpha, dom, coeff, obst, "bump", seed=seed))
    return out


def chain_suite(seed: int = 0) -> list[Recipe]:
    return [
        Recipe(0, 2.0, coeff="const", obstacles="active", seed=seed),
        Recipe(1, 2.0, coeff="laminate", obstacles="active", seed=seed),
        Recipe(2, 2.0, coeff="oscillatory", obstacles="active", seed=seed),
        Recipe(3, 3.0, coeff="laminate", obstacles="inactive", domain="reifenberg", seed=seed),
        Recipe(4, 1.8, coeff="oscillatory", obstacles="active", domain="reifenberg", seed=seed),
        Recipe(5, 3.0, coeff="const", obstacles="active", forcing="unit", seed=seed),
    ]


def pointwise_suite(seed: int = 0) -> list[Recipe]:
    return [
        Recipe(0, 2.0, alpha=0.0, coeff="const", obstacles="active", seed=seed),
        Recipe(1, 3.0, alpha=0.5, coeff="laminate", obstacles="inactive", domain="reifenberg",
               seed=seed),
        Recipe(2, 1.8, alpha=0.0, coeff="oscillatory", obstacles="active", seed=seed),
        Recipe(3, 2.0, alpha=0.5, coeff="const", obstacles="pinched", seed=seed),
    ]


# ----------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    name: str
    rows: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    verdict: str = "PASS"
    notes: list = field(default_factory=list)
    runtime: float = 0.0
    plots: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def csv(self) -> str:
        return csv_text(COLUMNS, self.rows)


def merge_reports(name: str, reports: list[ExperimentReport]) -> ExperimentReport:
    out = ExperimentReport(name)
    for r in reports:
        out.rows.extend(r.rows)
        out.notes.extend(r.notes)
        out.plots.update(r.plots)
        for k, v in r.constants.items():
            out.constants[k] = v
        out.runtime += r.runtime
        if r.verdict != "PASS":
            out.verdict = "FAIL"
    return out


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))   # results come back in submission order


def _solve(instance: Instance, config: SolverConfig | None, notes: list) -> Solution:
    sol = solve_double_obstacle(assemble(instance.problem), config)
    if not sol.converged:
        notes.append(f"{instance.id}: solver stopped at residual {sol.kkt_residual:.3e}")
    return sol


def _masked(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, values, 0.0)


def gradient_power(problem: ProblemSpec, solution: Solution) -> ScalarField:
    """chi_Omega |grad u|^p from the node-averaged gradient."""
    mag = solution.grad_u.magnitude()
    return ScalarField(problem.grid, _masked(mag ** problem.p, problem.domain.closure_mask))


def datum_power(problem: ProblemSpec) -> ScalarField:
    return ScalarField(problem.grid, _masked(problem.datum_power(), problem.domain.closure_mask))


# ----------------------------------------------------------------------------
# good-lambda level sets


@dataclass(frozen=True)
class GoodLambdaConfig:
    alpha: float = 0.0
    a: float = 1.0
    epsilon_grid: tuple = (0.1, 0.05, 0.02)
    lambda_knots: int = 64
    sigma_powers: tuple = (1, 2, 4)

    def __post_init__(self):
        if not 0 <= self.alpha < 2:
            raise ValueError("alpha must lie in [0, 2)")
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not all(0 < e < 1 for e in self.epsilon_grid):
            raise ValueError("every epsilon must lie in (0, 1)")
        if self.lambda_knots < 2:
            raise ValueError("need at least two lambda knots")

    @staticmethod
    def upper_bound(alpha: float, nu: float) -> float:
        return (2.0 / nu) * (1.0 - alpha / 2.0)

    @classmethod
    def from_nu(cls, alpha: float, nu: float, margin: float = 0.1, **kw) -> "GoodLambdaConfig":
        """a placed 10% inside (0, (2/nu)(1 - alpha/2))."""
        return cls(alpha=alpha, a=(1.0 - margin) * cls.upper_bound(alpha, nu), **kw)

    def check(self, nu: float, margin: float = 0.1) -> None:
        if not self.a <= (1.0 - margin) * self.upper_bound(self.alpha, nu) * (1 + 1e-12):
            raise ValueError(f"a = {self.a} is not inside the admissible interval for nu = {nu}")


def good_lambda_tables(Mu: np.ndarray, Mf: np.ndarray, node_mass: np.ndarray,
                       config: GoodLambdaConfig):
    """Yield per (epsilon, sigma) the arrays lam, lhs, rhs1, rhs2 and C(lam)."""
    pos = Mu[Mu > 0]
    if pos.size == 0:
        return
    lams = np.geomspace(pos.min(), pos.max(), config.lambda_knots)
    rhs1 = distribution_curve(Mu, node_mass, lams)
    for eps in config.epsilon_grid:
        lhs = distribution_curve(Mu, node_mass, eps ** (-config.a) * lams)
        for k in config.sigma_powers:
            sigma = eps ** k
            rhs2 = distribution_curve(Mf, node_mass, sigma * lams)
            with np.errstate(divide="ignore", invalid="ignore"):
                C = np.where(rhs1 > 0, np.maximum(lhs - rhs2, 0.0) / (eps * rhs1), 0.0)
            yield eps, sigma, lams, lhs, rhs1, rhs2, C


def run_good_lambda(problem: ProblemSpec, weight: Weight, config: GoodLambdaConfig,
                    solution: Solution | None = None, instance_id: str = "0",
                    solver: SolverConfig | None = None) -> ExperimentReport:
    """Per-epsilon minimal C over the sigma candidates such that every lambda knot holds."""
    t0 = time.perf_counter()
    rep = ExperimentReport("goodlambda")
    if weight.a_inf is None:
        raise ValueError("weight carries no fitted A_inf pair")
    if solution is None:
        solution = solve_double_obstacle(assemble(problem), solver)
    grid = problem.grid
    closure = problem.domain.closure_mask
    radii = dyadic_radii(grid)
    Mu = frac_maximal(gradient_power(problem, solution), config.alpha, radii).values
    Mf = frac_maximal(datum_power(problem), config.alpha, radii).values
    node_mass = _masked(weight.values * grid.quad_weights(), closure)
    Mu, Mf = _masked(Mu, closure), _masked(Mf, closure)
    c0, nu = weight.a_inf
    base = dict(instance_id=instance_id, grid=grid.cells_per_side, p=problem.p,
                alpha=config.alpha, gamma=weight.gamma, c0=c0, nu=nu)

    best: dict[float, tuple[float, float]] = {}
    monotone = True
    series = {}
    for eps, sigma, lams, lhs, rhs1, rhs2, C in good_lambda_tables(Mu, Mf, node_mass, config):
        ok = bool(np.all(np.diff(lhs) <= 0) and np.all(lhs <= rhs1))
        monotone &= ok
        c_max = float(C.max())
        for lam, l, r1, r2, c in zip(lams, lhs, rhs1, rhs2, C):
            rep.rows.append(dict(base, epsilon=eps, sigma=sigma, **{"lambda": lam}, lhs=l,
                                 rhs1=r1, rhs2=r2, C_emp=c, verdict="PASS" if ok else "FAIL",
                                 quantity="row"))
        if sigma == eps:
            # diagnostic only: the constant needed with no help from the data term
            with np.errstate(divide="ignore", invalid="ignore"):
                bare = float(np.max(np.where(rhs1 > 0, lhs / (eps * rhs1), 0.0)))
            rep.rows.append(dict(base, epsilon=eps, C_emp=bare, verdict="INFO",
                                 quantity="C_without_data"))
        prev = best.get(eps)
        # smallest C wins; on ties keep the larger (more demanding) sigma
        if prev is None or c_max < prev[0] or (c_max == prev[0] and sigma > prev[1]):
            best[eps] = (c_max, sigma)
        if eps == config.epsilon_grid[0] and sigma == eps:
            series = {"lhs": (lams, lhs), "rhs1": (lams, rhs1), "rhs2": (lams, rhs2)}

    if not best:
        rep.notes.append(f"{instance_id}: all-zero gradient, inequality vacuous")
        best = {eps: (0.0, eps) for eps in config.epsilon_grid}
    for eps, (c, sigma) in best.items():
        rep.constants[(instance_id, config.alpha, eps)] = c
        rep.rows.append(dict(base, epsilon=eps, sigma=sigma, C_emp=c, verdict="PASS",
                             quantity="best_C"))
    if series:
        rep.plots[f"goodlambda_{instance_id}_a{config.alpha:g}_g{grid.cells_per_side}"] = \
            svg_lambda_plot(series, f"{instance_id} alpha={config.alpha:g} grid={grid.cells_per_side}")
    rep.verdict = "PASS" if monotone else "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


def refinement_verdict(coarse: dict, fine: dict, growth: float = 2.0) -> dict:
    """PASS per key when fine <= growth * coarse (both zero is a vacuous pass)."""
    out = {}
    for k, c in coarse.items():
        f = fine[k]
        if not (math.isfinite(c) and math.isfinite(f)):
            out[k] = False
        elif c == 0.0:
            out[k] = f == 0.0
        else:
            out[k] = f <= growth * c
    return out


def stability_verdict(coarse: float, fine: float, band: float = 0.5) -> bool:
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        return False
    if coarse == 0.0:
        return fine == 0.0
    return abs(fine / coarse - 1.0) <= band


def _good_lambda_task(args):
    recipe, cells, alphas, nus, solver, cfg_kw = args
    inst = build_instance(recipe, cells)
    fit_weight(inst.weight, seed=recipe.seed)
    notes = []
    sol = _solve(inst, solver, notes)
    reps = []
    for alpha in alphas:
        cfg = GoodLambdaConfig.from_nu(alpha, nus[recipe.index], **cfg_kw)
        r = run_good_lambda(inst.problem, inst.weight, cfg, sol, inst.id)
        reps.append(r)
    out = merge_reports("goodlambda", reps)
    out.notes[:0] = notes
    return out


def good_lambda_experiment(cells: int = 32, seed: int = 0, alphas=(0.0, 0.5),
                           recipes: list[Recipe] | None = None, jobs: int = 1,
                           solver: SolverConfig | None = None, epsilon_grid=(0.1, 0.05, 0.02),
                           lambda_knots: int = 64) -> ExperimentReport:
    """Run at cells and 2*cells; a is fixed from the A_inf fit on the coarse grid."""
    cfg_kw = dict(epsilon_grid=tuple(epsilon_grid), lambda_knots=lambda_knots)
    t0 = time.perf_counter()
    recipes = good_lambda_suite(seed) if recipes is None else recipes
    nus = {}
    for r in recipes:
        w = build_instance(r, cells).weight
        nus[r.index] = fit_weight(w, seed=r.seed)[1]
    reports = {}
    for n in (cells, 2 * cells):
        reports[n] = merge_reports("goodlambda", _map(
            _good_lambda_task, [(r, n, tuple(alphas), nus, solver, cfg_kw) for r in recipes], jobs))
    rep = merge_reports("goodlambda", [reports[cells], reports[2 * cells]])
    rep.constants = {}
    verdicts = refinement_verdict(reports[cells].constants, reports[2 * cells].constants)
    for key, ok in verdicts.items():
        iid, alpha, eps = key
        c, f = reports[cells].constants[key], reports[2 * cells].constants[key]
        rep.constants[key] = (c, f)
        rep.rows.append(dict(instance_id=iid, grid=2 * cells, alpha=alpha, epsilon=eps,
                             C_emp=f, quantity="refinement_growth",
                             value=(f / c if c > 0 else (0.0 if f == 0 else math.inf)),
                             verdict="PASS" if ok else "FAIL"))
        if not ok:
            rep.verdict = "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


# ----------------------------------------------------------------------------
# norm domination


def norm_ratios(problem: ProblemSpec, solution: Solution, weight: Weight, alpha: float,
                params: LorentzParams, phi: YoungFunction | None = None) -> dict:
    """Lorentz, gradient (the alpha = 0 case) and optional Luxemburg ratios."""
    grid = problem.grid
    dom = problem.domain
    radii = dyadic_radii(grid)
    Gp = gradient_power(problem, solution)
    Fp = datum_power(problem)
    Mu = frac_maximal(Gp, alpha, radii)
    Mf = frac_maximal(Fp, alpha, radii)
    out = {}
    den = lorentz_norm(Mf, weight, params, domain=dom)
    if den == 0.0:
        raise ZeroDivisionError("datum vanishes identically")
    out["lorentz"] = lorentz_norm(Mu, weight, params, domain=dom) / den
    grad_mag = ScalarField(grid, Gp.values ** (1.0 / problem.p))
    datum = ScalarField(grid, Fp.values ** (1.0 / problem.p))
    out["gradient"] = (lorentz_norm(grad_mag, weight, params, domain=dom)
                       / lorentz_norm(datum, weight, params, domain=dom))
    if phi is not None:
        out["orlicz"] = (luxemburg_norm(Mu, weight, phi, params, domain=dom)
                         / luxemburg_norm(Mf, weight, phi, params, domain=dom))
    return out


def run_norm_ratio(suite: list[Instance], weight: Weight | None, alpha: float | None,
                   params: LorentzParams, phi: YoungFunction | None = None,
                   solver: SolverConfig | None = None, solutions=None) -> ExperimentReport:
    """Ratios for every instance; ``weight``/``alpha`` of None use each instance's own."""
    t0 = time.perf_counter()
    if not suite:
        raise ValueError("suite is empty")
    rep = ExperimentReport("normratio")
    suite_max: dict[str, float] = {}
    for k, inst in enumerate(suite):
        w = inst.weight if weight is None else weight
        a = inst.recipe.alpha if alpha is None else alpha
        sol = solutions[k] if solutions is not None else _solve(inst, solver, rep.notes)
        try:
            ratios = norm_ratios(inst.problem, sol, w, a, params, phi)
        except ZeroDivisionError:
            rep.notes.append(f"{inst.id}: zero datum, excluded")
            continue
        pinched = inst.recipe.obstacles == "pinched"
        for name, r in ratios.items():
            ok = math.isfinite(r) and (r <= 1.02 if pinched else True)
            rep.rows.append(dict(instance_id=inst.id, grid=inst.problem.grid.cells_per_side,
                                 p=inst.problem.p, alpha=a, gamma=w.gamma, quantity=name,
                                 value=r, verdict="PASS" if ok else "FAIL"))
            if not ok:
                rep.verdict = "FAIL"
            suite_max[name] = max(suite_max.get(name, 0.0), r)
    rep.constants = suite_max
    rep.runtime = time.perf_counter() - t0
    return rep


NORM_PARAMS = LorentzParams(q=2.0, s=3.0)
NORM_PHI = YoungFunction("power_log", 1.0)


def _norm_task(args):
    recipe, cells, params, phi, solver = args
    inst = build_instance(recipe, cells)
    return run_norm_ratio([inst], None, None, params, phi, solver)


def norm_ratio_experiment(cells: int = 32, seed: int = 0, recipes=None,
                          params: LorentzParams = NORM_PARAMS,
                          phi: YoungFunction | None = NORM_PHI, jobs: int = 1,
                          solver: SolverConfig | None = None) -> ExperimentReport:
    t0 = time.perf_counter()
    recipes = norm_ratio_suite(seed) if recipes is None else recipes
    per_grid = {}
    for n in (cells, 2 * cells):
        reps = _map(_norm_task, [(r, n, params, phi, solver) for r in recipes], jobs)
        m = merge_reports("normratio", reps)
        m.constants = {}
        for r in reps:
            for k, v in r.constants.items():
                m.constants[k] = max(m.constants.get(k, 0.0), v)
        per_grid[n] = m
    rep = merge_reports("normratio", [per_grid[cells], per_grid[2 * cells]])
    rep.constants = {}
    for name, c in per_grid[cells].constants.items():
        f = per_grid[2 * cells].constants[name]
        ok = stability_verdict(c, f)
        rep.constants[name] = (c, f)
        rep.rows.append(dict(instance_id="suite", grid=2 * cells, quantity=f"suite_max_{name}",
                             value=f, C_emp=c, verdict="PASS" if ok else "FAIL"))
        if not ok:
            rep.verdict = "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


# ----------------------------------------------------------------------------
# pointwise Riesz bounds


def sample_points(n: int, seed: int, extent: float = 1.0) -> np.ndarray:
    """Seeded points of [-0.25, 1.25]^2 * extent (some fall outside Omega)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.25 * extent, 1.25 * extent, size=(n, 2))


def run_pointwise_riesz(problem: ProblemSpec, beta: float, t: float, sample_points_n: int = 64,
                        alpha: float = 0.0, solution: Solution | None = None,
                        instance_id: str = "0", seed: int = 0, q_grad: float = 2.0,
                        solver: SolverConfig | None = None, pinched: bool = False) -> ExperimentReport:
    """max over seeded points of I_beta(chi |M_alpha(|grad u|^p)|^t) / I_beta(chi |M_alpha(F^p)|^t)."""
    if not 0 < beta < 2:
        raise ValueError("beta must lie in (0, 2)")
    if not t > 0:
        raise ValueError("t must be positive")
    t0 = time.perf_counter()
    rep = ExperimentReport("pointwise")
    if solution is None:
        solution = solve_double_obstacle(assemble(problem), solver)
    grid = problem.grid
    closure = problem.domain.closure_mask
    radii = dyadic_radii(grid)
    Gp = gradient_power(problem, solution)
    Fp = datum_power(problem)
    Mu = _masked(frac_maximal(Gp, alpha, radii).values, closure)
    Mf = _masked(frac_maximal(Fp, alpha, radii).values, closure)
    pts = sample_points(sample_points_n, seed, grid.extent)
    pairs = {
        "riesz_maximal": (Mu ** t, Mf ** t),
        "riesz_gradient": (Gp.values ** (q_grad / problem.p), Fp.values ** (q_grad / problem.p)),
    }
    for name, (lf, rf) in pairs.items():
        lhs = riesz_at(ScalarField(grid, lf), beta, pts)
        rhs = riesz_at(ScalarField(grid, rf), beta, pts)
        if not np.any(rhs > 0):
            rep.notes.append(f"{instance_id}: right side vanishes identically ({name})")
            ratio = 0.0 if not np.any(lhs > 0) else math.inf
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = float(np.max(np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))))
        ok = math.isfinite(ratio) and (ratio <= 1.02 if pinched else True)
        rep.constants[name] = ratio
        rep.rows.append(dict(instance_id=instance_id, grid=grid.cells_per_side, p=problem.p,
                             alpha=alpha, quantity=name, value=ratio,
                             verdict="PASS" if ok else "FAIL"))
        if not ok:
            rep.verdict = "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


def _pointwise_task(args):
    recipe, cells, beta, t, n, solver = args
    inst = build_instance(recipe, cells)
    return run_pointwise_riesz(inst.problem, beta, t, n, recipe.alpha, instance_id=inst.id,
                               seed=recipe.seed, solver=solver,
                               pinched=recipe.obstacles == "pinched")


def pointwise_experiment(cells: int = 32, seed: int = 0, beta: float = 1.0, t: float = 1.0,
                         n_points: int = 64, recipes=None, jobs: int = 1,
                         solver: SolverConfig | None = None) -> ExperimentReport:
    t0 = time.perf_counter()
    recipes = pointwise_suite(seed) if recipes is None else recipes
    maxima = {}
    parts = []
    for n in (cells, 2 * cells):
        reps = _map(_pointwise_task, [(r, n, beta, t, n_points, solver) for r in recipes], jobs)
        parts.extend(reps)
        for r in reps:
            for k, v in r.constants.items():
                maxima[(n, k)] = max(maxima.get((n, k), 0.0), v)
    rep = merge_reports("pointwise", parts)
    rep.constants = {}
    for name in ("riesz_maximal", "riesz_gradient"):
        c, f = maxima[(cells, name)], maxima[(2 * cells, name)]
        ok = stability_verdict(c, f)
        rep.constants[name] = (c, f)
        rep.rows.append(dict(instance_id="suite", grid=2 * cells, quantity=f"suite_max_{name}",
                             value=f, C_emp=c, verdict="PASS" if ok else "FAIL"))
        if not ok:
            rep.verdict = "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


# ----------------------------------------------------------------------------
# comparison chain u -> u1 -> u2 -> v -> V


def _node_mean(values: np.ndarray, region: np.ndarray) -> float:
    return float(values[region].mean()) if region.any() else 0.0


def run_comparison_chain(problem: ProblemSpec, ball: Ball, solution: Solution | None = None,
                         instance_id: str = "0", solver: SolverConfig | None = None,
                         tag: str = "ball") -> ExperimentReport:
    t0 = time.perf_counter()
    solver = solver or SolverConfig()
    rep = ExperimentReport("chain")
    grid = problem.grid
    if ball.radius < 4 * grid.h * (1 - 1e-12):
        raise ValueError("ball radius is not resolvable (needs >= 4h)")
    dp = assemble(problem)
    dom = problem.domain
    region = cells_in_ball(grid, ball) & dom.closure_mask
    if not (region & dom.interior_mask).any():
        raise ValueError("ball does not meet the domain")
    u = solution or solve_double_obstacle(dp, solver)
    p = problem.p
    base = dict(instance_id=f"{instance_id}:{tag}", grid=grid.cells_per_side, p=p)
    eps_h = 10 * solver.tol ** (1.0 / p)
    vals: dict[str, float] = {}

    stages = {}
    try:
        stages["u1"] = solve_one_obstacle(dp, region, u.u, problem.psi1, "div_A_psi2", solver)
        stages["u2"] = solve_dirichlet(dp, region, stages["u1"].u, "div_A_psi1", solver)
        stages["v"] = solve_dirichlet(dp, region, u.u, "zero", solver)
        stages["V"] = solve_frozen(dp, region, stages["v"].u, solver)
    except ValueError as exc:
        rep.notes.append(f"{base['instance_id']}: chain infeasible after {list(stages)}: {exc}")
        rep.verdict = "FAIL"
        rep.rows.append(dict(base, quantity="infeasible", verdict="FAIL"))
        return rep
    for name, s in stages.items():
        if not s.converged:
            rep.notes.append(f"{base['instance_id']}: {name} residual {s.kkt_residual:.3e}")

    inner = region & dom.interior_mask
    vals["u1_minus_psi2"] = float(np.max((stages["u1"].u.values - problem.psi2.values)[inner]))
    vals["psi1_minus_u2"] = float(np.max((problem.psi1.values - stages["u2"].u.values)[inner]))
    feas = vals["u1_minus_psi2"] <= eps_h and vals["psi1_minus_u2"] <= eps_h

    grad_u = region_mean_power(u.tri_grad, region, p)
    diff_uv = region_mean_power(u.tri_grad, region, p, other=stages["v"].tri_grad)
    datum = _node_mean(problem.datum_power(), region)
    for eps in (0.5, 0.1):
        num = max(diff_uv - eps * grad_u, 0.0)
        vals[f"C_uv_eps{eps:g}"] = num / datum if datum > 0 else (0.0 if num == 0 else math.inf)

    rho = ball.radius / 2
    inner_ball = cells_in_ball(grid, Ball(ball.center, rho)) & dom.closure_mask
    V = stages["V"].tri_grad
    big = region_mean_power(V, region, p)
    for gam in (1.5, 2.0):
        small = region_mean_power(V, inner_ball, gam * p) ** (1.0 / gam)
        vals[f"RH_gamma{gam:g}"] = small / big if big > 0 else (0.0 if small == 0 else math.inf)

    delta = partial_bmo_seminorm(problem.coeff, 2 * rho)
    vals["delta_emp"] = delta
    diff_vV = region_mean_power(stages["v"].tri_grad, inner_ball, p, other=V)
    vals["grad_v_minus_V"] = diff_vV
    den = delta * region_mean_power(stages["v"].tri_grad, region, p)
    vals["ratio_vV"] = diff_vV / den if den > 0 else (0.0 if diff_vV <= 1e-20 else math.inf)

    for name, v in vals.items():
        ok = math.isfinite(v)
        if name in ("u1_minus_psi2", "psi1_minus_u2"):
            ok = v <= eps_h
        rep.rows.append(dict(base, quantity=name, value=v, verdict="PASS" if ok else "FAIL"))
    rep.constants = {(base["instance_id"], k): v for k, v in vals.items()}
    rep.verdict = "PASS" if feas and all(math.isfinite(v) for v in vals.values()) else "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


def chain_balls(instance: Instance) -> dict[str, Ball]:
    """One interior ball and one centred on the lower boundary, both of radius 1/4."""
    dom = instance.problem.domain
    xs = np.arange(dom.grid.shape[1]) * dom.grid.h
    y0 = float(np.interp(0.5, xs, dom.boundary_heights))
    return {"interior": Ball((0.5, 0.6), 0.25), "boundary": Ball((0.5, y0), 0.25)}


def _chain_task(args):
    recipe, cells, solver = args
    inst = build_instance(recipe, cells)
    dp = assemble(inst.problem)
    sol = solve_double_obstacle(dp, solver)
    reps = [run_comparison_chain(inst.problem, b, sol, inst.id, solver, tag)
            for tag, b in chain_balls(inst).items()]
    return merge_reports("chain", reps)


def chain_experiment(cells: int = 32, seed: int = 0, recipes=None, jobs: int = 1,
                     solver: SolverConfig | None = None) -> ExperimentReport:
    """Feasibility facts at both grids; reverse Hoelder constants grow by at most 2x."""
    t0 = time.perf_counter()
    recipes = chain_suite(seed) if recipes is None else recipes
    per = {n: merge_reports("chain", _map(_chain_task, [(r, n, solver) for r in recipes], jobs))
           for n in (cells, 2 * cells)}
    rep = merge_reports("chain", [per[cells], per[2 * cells]])
    rep.constants = {}
    for key, c in per[cells].constants.items():
        iid, name = key
        f = per[2 * cells].constants[key]
        rep.constants[key] = (c, f)
        if name.startswith("RH_"):
            ok = refinement_verdict({0: c}, {0: f})[0]
            rep.rows.append(dict(instance_id=iid, grid=2 * cells, quantity=f"{name}_growth",
                                 value=(f / c if c > 0 else 0.0), C_emp=f,
                                 verdict="PASS" if ok else "FAIL"))
            if not ok:
                rep.verdict = "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


# ----------------------------------------------------------------------------
# weak-type bound for M_alpha


def smooth_field(cells: int, seed: int, extent: float = 1.0) -> ScalarField:
    """Sum of 3 seeded Gaussian bumps; the continuous function is grid independent."""
    grid = build_grid(cells, extent)
    rng = np.random.default_rng(seed)
    X, Y = grid.coords()
    out = np.zeros(grid.shape)
    for _ in range(3):
        c = rng.uniform(0.2, 0.8, 2) * extent
        w = rng.uniform(0.05, 0.2) * extent
        amp = rng.uniform(0.5, 2.0)
        out += amp * np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2) / (2 * w * w))
    return ScalarField(grid, out)


def run_weak_type(cells: int = 32, seed: int = 0, n_fields: int = 10, alpha: float = 0.5,
                  s: float = 1.5, n_lambda: int = 24) -> ExperimentReport:
    """sup over lambda of |{M_alpha f > lambda}| / (lambda^-s int |f|^s)^(2/(2 - alpha s))."""
    t0 = time.perf_counter()
    rep = ExperimentReport("weaktype")
    sups = {}
    for n in (cells, 2 * cells):
        for k in range(n_fields):
            f = smooth_field(n, seed * 1000 + k)
            top = float(frac_maximal(smooth_field(cells, seed * 1000 + k), alpha).values.max())
            best = 0.0
            for lam in np.geomspace(1e-2 * top, top, n_lambda):
                lhs, rhs = weak_type_check(f, alpha, s, float(lam))
                best = max(best, lhs / rhs)
            sups[(n, k)] = best
            rep.rows.append(dict(instance_id=f"field{k:02d}", grid=n, alpha=alpha,
                                 quantity="sup_ratio", value=best,
                                 verdict="PASS" if math.isfinite(best) else "FAIL"))
    c = max(sups[(cells, k)] for k in range(n_fields))
    f = max(sups[(2 * cells, k)] for k in range(n_fields))
    ok = refinement_verdict({0: c}, {0: f})[0]
    rep.constants = {"sup_ratio": (c, f)}
    rep.rows.append(dict(instance_id="suite", grid=2 * cells, alpha=alpha, quantity="sup_growth",
                         value=f / c if c > 0 else 0.0, C_emp=f, verdict="PASS" if ok else "FAIL"))
    rep.verdict = "PASS" if ok else "FAIL"
    rep.runtime = time.perf_counter() - t0
    return rep


