"""Quick sanity suite: the cases with known answers for every module."""

from __future__ import annotations

import numpy as np

from .experiments import (GoodLambdaConfig, Recipe, build_instance, fit_weight,
                          run_comparison_chain, run_good_lambda, run_norm_ratio,
                          run_pointwise_riesz)
from .fields import ScalarField
from .geometry import Ball, build_grid, cells_in_ball, make_domain, measure_flatness
from .norms import LorentzParams, YoungFunction, estimate_fund_constant, lorentz_norm, luxemburg_norm
from .operators import distribution, frac_maximal, localization_check, weak_type_check
from .solver import (assemble, kkt_residual, solve_dirichlet, solve_double_obstacle,
                     solve_frozen, triangle_gradients)
from .weights import (ball_family, coefficient_field, constant_weight, estimate_Ainf,
                      estimate_Ap, partial_bmo_seminorm, power_weight, weighted_measure)


def _geometry():
    g = build_grid(32)
    yield "grid spacing", g.h == 0.03125 and g.n_nodes == 33 ** 2
    yield "grid extent 2", build_grid(4, 2.0).h == 0.5
    try:
        build_grid(3)
        yield "grid too small rejected", False
    except ValueError:
        yield "grid too small rejected", True
    sq = make_domain(g, "square")
    yield "square flatness", measure_flatness(sq, 1.0) <= 2 * g.h
    try:
        make_domain(g, "reifenberg", 0.6, 0.5, 1)
        yield "delta >= 1/2 rejected", False
    except ValueError:
        yield "delta >= 1/2 rejected", True
    yield "covering ball", bool(cells_in_ball(g, Ball((0.5, 0.5), 2.0)).all())


def _weights():
    g = build_grid(32)
    yield "gamma 0 is constant", bool(np.all(power_weight(g, gamma=0.0).values == 1.0))
    w1 = power_weight(g, (0.5, 0.5), 1.0)
    yield "gamma 1 value", abs(w1.values[8, 16] - 0.25) < 1e-15
    wm = power_weight(g, (0.5, 0.5), -1.0)
    yield "gamma -1 mollified", abs(wm.values[16, 16] - 2 / g.h) < 1e-12
    one = constant_weight(g)
    yield "unit measure", abs(weighted_measure(one, np.ones(g.shape, bool)) - 1.0) <= g.h
    yield "empty measure", weighted_measure(one, np.zeros(g.shape, bool)) == 0.0
    balls = ball_family(g, [(0.5, 0.5), (0.3, 0.6)], [0.25, 0.125])
    yield "A_p of constant", abs(estimate_Ap(one, 2.0, balls) - 1.0) <= 0.01
    c0, nu = estimate_Ainf(constant_weight(g), balls)
    yield "A_inf of constant", abs(c0 - 1) <= 0.05 and abs(nu - 1) <= 0.05
    yield "bmo of constant", partial_bmo_seminorm(coefficient_field(g, 2.0, 1.5), 0.25) == 0.0
    lam = coefficient_field(g, 2.0, lambda X, Y: 1.0 + (X > 0.4) + 0.5 * (X > 0.77))
    yield "bmo of laminate", partial_bmo_seminorm(lam, 0.25) == 0.0


def _operators():
    g = build_grid(32)
    X, Y = g.coords()
    c = ScalarField(g, np.full(g.shape, 2.0))
    M = frac_maximal(c, 0.0, radii=[2 * g.h, 4 * g.h])
    yield "M0 of a constant", abs(M.values[16, 16] - 2.0) < 1e-12
    yield "M of zero", not frac_maximal(ScalarField.zeros(g)).values.any()
    r = ScalarField(g, np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) * 10))
    Mr = frac_maximal(r, 0.5).values
    yield "rotation invariance", float(np.max(np.abs(Mr - np.rot90(Mr)))) <= 1e-12
    d = distribution(ScalarField(g, X), constant_weight(g), 0.25)
    yield "distribution of x1", abs(d - 0.75) <= 2 * g.h
    yield "distribution above max", distribution(ScalarField(g, X), constant_weight(g), 1.0) == 0.0
    yield "weak type of zero", weak_type_check(ScalarField.zeros(g), 0.0, 1.0, 0.1)[0] == 0.0
    a = weak_type_check(r, 0.0, 1.0, 0.2)
    b = weak_type_check(ScalarField(g, 2 * r.values), 0.0, 1.0, 0.4)
    yield "weak type homogeneity", a == b
    rs, bd = localization_check(r, 0.5, (0.5, 0.5), (0.5, 0.5), 0.25)
    yield "localization same centre", rs <= bd


def _norms():
    g = build_grid(32)
    one = constant_weight(g)
    f1 = ScalarField(g, np.ones(g.shape))
    yield "Lorentz of 1", abs(lorentz_norm(f1, one, LorentzParams(2, 2)) - 1.0) <= 1e-6
    f = ScalarField(g, np.random.default_rng(0).random(g.shape))
    pr = LorentzParams(1.5, 3.0)
    yield "Lorentz homogeneity", abs(lorentz_norm(2 * f, one, pr) - 2 * lorentz_norm(f, one, pr)) \
        <= 1e-10 * lorentz_norm(f, one, pr)
    phi = YoungFunction("power_log", 2.0)
    yield "Luxemburg of zero", luxemburg_norm(ScalarField.zeros(g), one, phi, pr) == 0.0
    n1, n3 = luxemburg_norm(f, one, phi, pr), luxemburg_norm(3 * f, one, phi, pr)
    yield "Luxemburg homogeneity", abs(n3 - 3 * n1) <= 1e-8 * n3
    yield "fund constant p=2", estimate_fund_constant(2.0, 0.1) <= 1.0


def _solver():
    zero = build_instance(Recipe(0, forcing="none"), 16)
    dp = assemble(zero.problem)
    sol = solve_double_obstacle(dp)
    yield "zero data gives zero", sol.iterations == 0 and not sol.u.values.any()
    lo, up = triangle_gradients(np.pad(np.ones((1, 1)), 1), 1.0 / 16)
    yield "hat gradient", abs(abs(lo[0][1, 1]) - 16) < 1e-12 and abs(abs(up[1][0, 0]) - 16) < 1e-12
    pin = build_instance(Recipe(0, obstacles="pinched"), 16)
    dpp = assemble(pin.problem)
    sp = solve_double_obstacle(dpp)
    yield "pinched gives psi", bool(np.array_equal(sp.u.values, pin.problem.psi1.values))
    yield "pinched residual", kkt_residual(sp, dpp) == 0.0
    region = cells_in_ball(zero.problem.grid, Ball((0.5, 0.5), 0.3))
    v = solve_dirichlet(dp, region, np.zeros(zero.problem.grid.shape))
    yield "zero Dirichlet", not v.u.values.any()
    lam = build_instance(Recipe(0, coeff="laminate", forcing="bump", p=3.0), 16)
    dl = assemble(lam.problem)
    ul = solve_double_obstacle(dl)
    vl = solve_dirichlet(dl, region, ul.u)
    Vl = solve_frozen(dl, region, vl.u)
    yield "frozen equals original", float(np.max(np.abs(Vl.u.values - vl.u.values))) <= 1e-12


def _experiments():
    zero = build_instance(Recipe(0, forcing="none"), 16)
    fit_weight(zero.weight)
    rep = run_good_lambda(zero.problem, zero.weight, GoodLambdaConfig())
    yield "good-lambda vacuous", rep.passed and all(v == 0.0 for v in rep.constants.values())
    rp = run_pointwise_riesz(zero.problem, 1.0, 1.0, 16)
    yield "pointwise of u = 0", rp.constants["riesz_maximal"] == 0.0
    pin = build_instance(Recipe(0, obstacles="pinched"), 16)
    nr = run_norm_ratio([pin], None, 0.0, LorentzParams(2.0, 3.0), YoungFunction("power", 1.0))
    yield "pinched norm ratio", nr.passed and max(nr.constants.values()) <= 1.02
    ch = run_comparison_chain(zero.problem, Ball((0.5, 0.5), 0.25))
    vals = [v for (_, k), v in ch.constants.items() if not k.startswith(("u1_", "psi1_"))]
    yield "collapsed chain", ch.passed and all(v == 0.0 for v in vals)


SECTIONS = {"geometry": _geometry, "weights": _weights, "operators": _operators,
            "norms": _norms, "solver": _solver, "experiments": _experiments}


def run_selftest() -> list[tuple[str, str, bool]]:
    out = []
    for module, gen in SECTIONS.items():
        try:
            for name, ok in gen():
                out.append((module, name, bool(ok)))
        except Exception as exc:  # a crash is a failure of that module's suite
            out.append((module, f"crashed: {exc!r}", False))
    return out


def all_passed(results) -> bool:
    return bool(results) and all(ok for _, _, ok in results)
