"""Command line entry point.

stdout carries only the path of the written report; everything else goes to
stderr. Exit codes: 0 success/PASS, 1 usage or configuration error, 2 verdict
FAIL or solver non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import ConfigError, RunConfig, load_config
from .geometry import build_grid
from .io import csv_text, read_field, read_mask, write_field, write_mask
from .norms import LorentzParams, YoungFunction, lorentz_norm, luxemburg_norm, weighted_lq
from .operators import frac_maximal, riesz_potential
from .selftest import all_passed, run_selftest
from .solver import ProblemSpec, SolverConfig, assemble, five_point_reference, solve_double_obstacle
from .weights import (coefficient_field, dyadic_ball_family, estimate_Ainf, estimate_Ap,
                      partial_bmo_seminorm, power_weight)

COMMANDS = ["solve", "op-max", "op-riesz", "norm", "weight-fit", "bmo", "exp-goodlambda",
            "exp-normratio", "exp-pointwise", "exp-chain", "selftest"]


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reglab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--grid", type=int, help="cells per side")
    ap.add_argument("--p", type=float)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory (default $REGLAB_OUT)")
    ap.add_argument("--jobs", type=int, help="concurrent instances (default 1)")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    run = cfg.run
    if args.grid is not None:
        run = replace(run, grid=args.grid)
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if args.out is not None:
        run = replace(run, out=args.out)
    if args.jobs is not None:
        run = replace(run, jobs=args.jobs)
    cfg.run = run
    if args.p is not None:
        cfg.problem = replace(cfg.problem, p=args.p)
    if args.gamma is not None:
        cfg.weight = replace(cfg.weight, gamma=args.gamma)
    if args.alpha is not None:
        cfg.operator = replace(cfg.operator, alpha=args.alpha)
    if cfg.run.jobs < 1:
        raise ConfigError("'run.jobs' must be >= 1")
    return cfg


def solver_config(cfg: RunConfig) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(tol=s.tol, max_iter=s.max_iter, mu=s.mu, mu_start=s.mu_start,
                        mu_stages=s.mu_stages)


def _recipe(cfg: RunConfig) -> ex.Recipe:
    pr = cfg.problem
    return ex.Recipe(0, p=pr.p, gamma=cfg.weight.gamma, alpha=cfg.operator.alpha,
                     domain=pr.domain, coeff=pr.coefficient, obstacles=pr.obstacles,
                     forcing=pr.forcing, seed=cfg.run.seed, delta=pr.delta, r0=pr.r0)


def _out(cfg: RunConfig) -> Path:
    d = Path(cfg.out_dir())
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


# ----------------------------------------------------------------------------
# subcommands; each returns (exit code, report path)


def cmd_solve(cfg: RunConfig):
    inst = ex.build_instance(_recipe(cfg), cfg.run.grid)
    problem = inst.problem
    if cfg.input.mask:
        dom = read_mask(cfg.input.mask)
        if dom.grid.shape != problem.grid.shape:
            raise ConfigError("'input.mask' grid does not match 'run.grid'")
        inst = ex.build_instance(replace(_recipe(cfg), domain="square"), cfg.run.grid)
        p0 = inst.problem
        problem = ProblemSpec(dom, p0.p, p0.coeff, p0.F, p0.g, p0.psi1, p0.psi2)
    sc = solver_config(cfg)
    sol = solve_double_obstacle(assemble(problem), sc)
    out = _out(cfg)
    write_field(out / "u.field", sol.u)
    write_mask(out / "domain.mask", problem.domain)
    rows = [dict(quantity="iterations", value=sol.iterations),
            dict(quantity="kkt_residual", value=sol.kkt_residual),
            dict(quantity="converged", value=int(sol.converged)),
            dict(quantity="active_lower", value=int(sol.active_lower.sum())),
            dict(quantity="active_upper", value=int(sol.active_upper.sum()))]
    linear = (problem.p == 2 and cfg.problem.coefficient == "const"
              and not problem.F.values.any() and not sol.active_lower.any()
              and not sol.active_upper.any())
    if linear:
        ref = five_point_reference(problem.domain, problem.g.values)
        rel = float(np.linalg.norm(sol.u.values - ref) / max(np.linalg.norm(ref), 1e-300))
        rows.append(dict(quantity="rel_l2_vs_direct_solve", value=rel))
        _log(f"relative L2 difference to the direct 5-point solve: {rel:.3e}")
    rows += [dict(quantity="energy", value=e) for e in sol.energy_trace]
    path = _write(out / "solve.csv", csv_text(["quantity", "value"], rows))
    if not sol.converged:
        _log(f"solver did not converge: residual {sol.kkt_residual:.3e}")
        return 2, path
    _log(f"converged in {sol.iterations} iterations, residual {sol.kkt_residual:.3e}")
    return 0, path


def _input_field(cfg: RunConfig):
    return read_field(cfg.require("input.field"))


def cmd_op_max(cfg: RunConfig):
    f = _input_field(cfg)
    M = frac_maximal(f, cfg.operator.alpha)
    return 0, write_field(_out(cfg) / "maximal.field", M)


def cmd_op_riesz(cfg: RunConfig):
    f = _input_field(cfg)
    return 0, write_field(_out(cfg) / "riesz.field", riesz_potential(f, cfg.operator.beta))


def cmd_norm(cfg: RunConfig):
    f = _input_field(cfg)
    w = power_weight(f.grid, tuple(cfg.weight.center), cfg.weight.gamma)
    params = LorentzParams(cfg.lorentz.q, cfg.lorentz.s)
    rows = [dict(quantity="lorentz", value=lorentz_norm(f, w, params))]
    if params.s == params.q:
        rows.append(dict(quantity="weighted_lq", value=weighted_lq(f, w, params.q)))
    if cfg.young.family:
        phi = YoungFunction(cfg.young.family, cfg.young.p)
        rows.append(dict(quantity="luxemburg", value=luxemburg_norm(f, w, phi, params)))
    return 0, _write(_out(cfg) / "norm.csv", csv_text(["quantity", "value"], rows))


def cmd_weight_fit(cfg: RunConfig):
    grid = build_grid(cfg.run.grid)
    w = power_weight(grid, tuple(cfg.weight.center), cfg.weight.gamma)
    balls = dyadic_ball_family(grid, ex.FIT_CENTERS + [tuple(cfg.weight.center)], rmax=0.25)
    ap = estimate_Ap(w, cfg.problem.p, balls)
    c0, nu = estimate_Ainf(w, balls, cfg.weight.subsets_per_ball, cfg.run.seed)
    rows = [dict(grid=grid.cells_per_side, p=cfg.problem.p, gamma=cfg.weight.gamma,
                 quantity="A_p", value=ap, c0=c0, nu=nu)]
    return 0, _write(_out(cfg) / "weight.csv", csv_text(ex.COLUMNS, rows))


def cmd_bmo(cfg: RunConfig):
    grid = build_grid(cfg.run.grid)
    coeff = coefficient_field(grid, cfg.problem.p, a=ex.coefficient_function(cfg.problem.coefficient))
    val = partial_bmo_seminorm(coeff, cfg.problem.r0)
    rows = [dict(grid=grid.cells_per_side, p=cfg.problem.p, quantity="partial_bmo", value=val)]
    return 0, _write(_out(cfg) / "bmo.csv", csv_text(ex.COLUMNS, rows))


def _overrides(recipes, args):
    out = []
    for r in recipes:
        kw = {}
        if args.p is not None:
            kw["p"] = args.p
        if args.gamma is not None:
            kw["gamma"] = args.gamma
        if args.alpha is not None:
            kw["alpha"] = args.alpha
        out.append(replace(r, **kw))
    return out


def _finish(cfg: RunConfig, rep: ex.ExperimentReport, name: str):
    out = _out(cfg)
    for note in rep.notes:
        _log(note)
    for key, plot in sorted(rep.plots.items()):
        (out / f"{key}.svg").write_text(plot)
    path = _write(out / f"{name}.csv", rep.csv())
    _log(f"{name}: {rep.verdict} ({rep.runtime:.1f} s)")
    return (0 if rep.passed else 2), path


def cmd_experiment(cfg: RunConfig, args, which: str):
    n, seed, jobs, sc = cfg.run.grid, cfg.run.seed, cfg.run.jobs, solver_config(cfg)
    if which == "exp-goodlambda":
        recipes = _overrides(ex.good_lambda_suite(seed), args)
        alphas = (args.alpha,) if args.alpha is not None else (0.0, 0.5)
        rep = ex.good_lambda_experiment(n, seed, alphas, recipes, jobs, sc,
                                        epsilon_grid=tuple(cfg.goodlambda.epsilon_grid),
                                        lambda_knots=cfg.goodlambda.lambda_knots)
        return _finish(cfg, rep, "goodlambda")
    if which == "exp-normratio":
        recipes = _overrides(ex.norm_ratio_suite(seed), args)
        phi = YoungFunction(cfg.young.family, cfg.young.p) if cfg.young.family else ex.NORM_PHI
        rep = ex.norm_ratio_experiment(n, seed, recipes, LorentzParams(cfg.lorentz.q, cfg.lorentz.s),
                                       phi, jobs, sc)
        return _finish(cfg, rep, "normratio")
    if which == "exp-pointwise":
        recipes = _overrides(ex.pointwise_suite(seed), args)
        op = cfg.operator
        rep = ex.pointwise_experiment(n, seed, op.beta, op.t, op.points, recipes, jobs, sc)
        return _finish(cfg, rep, "pointwise")
    recipes = _overrides(ex.chain_suite(seed), args)
    rep = ex.chain_experiment(n, seed, recipes, jobs, sc)
    return _finish(cfg, rep, "chain")


def cmd_selftest(cfg: RunConfig):
    results = run_selftest()
    for module, name, ok in results:
        _log(f"{'PASS' if ok else 'FAIL'}  {module}: {name}")
    rows = [dict(instance_id=f"{m}:{n}", verdict="PASS" if ok else "FAIL") for m, n, ok in results]
    path = _write(_out(cfg) / "selftest.csv", csv_text(ex.COLUMNS, rows))
    return (0 if all_passed(results) else 2), path


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = resolve_config(args)
        if args.command == "solve":
            code, path = cmd_solve(cfg)
        elif args.command == "op-max":
            code, path = cmd_op_max(cfg)
        elif args.command == "op-riesz":
            code, path = cmd_op_riesz(cfg)
        elif args.command == "norm":
            code, path = cmd_norm(cfg)
        elif args.command == "weight-fit":
            code, path = cmd_weight_fit(cfg)
        elif args.command == "bmo":
            code, path = cmd_bmo(cfg)
        elif args.command == "selftest":
            code, path = cmd_selftest(cfg)
        else:
            code, path = cmd_experiment(cfg, args, args.command)
    except (ConfigError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return 1
    except ValueError as exc:
        # invalid parameters surface as ValueError from the numerical modules
        _log(f"error: {exc}")
        return 1
    except ArithmeticError as exc:
        _log(f"numerical failure: {exc}")
        return 2
    print(path)
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
