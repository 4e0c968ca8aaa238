"""The twelve acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict; conftest prints them in the
terminal summary. Running this file directly prints the same lines:

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np

from reglab import experiments as ex
from reglab.cli import dispatch
from reglab.fields import ScalarField, VectorField
from reglab.geometry import build_grid, make_domain
from reglab.norms import LorentzParams, YoungFunction, lorentz_norm, luxemburg_norm
from reglab.operators import frac_maximal, riesz_at
from reglab.solver import (ProblemSpec, SolverConfig, assemble, kkt_residual,
                           solve_double_obstacle)
from reglab.weights import coefficient_field, constant_weight, power_weight

RESULTS: list[str] = []


def _record(number: int, title: str, ok: bool, detail: str, elapsed: float, limit: float) -> None:
    in_time = elapsed <= limit
    verdict = "PASS" if ok and in_time else "FAIL"
    line = f"{verdict}  criterion {number:2d} {title}: {detail} [{elapsed:.1f}s / {limit:.0f}s]"
    RESULTS.append(line)
    assert ok, line
    assert in_time, line


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ----------------------------------------------------------------------------
# shared helpers


def _poisson(cells: int) -> ProblemSpec:
    g = build_grid(cells)
    big = np.full(g.shape, 10.0)
    return ProblemSpec(make_domain(g), 2.0, coefficient_field(g, 2.0), VectorField.zeros(g),
                       ScalarField(g, np.ones(g.shape)), ScalarField(g, -big), ScalarField(g, big))


def _dense_poisson(cells: int) -> np.ndarray:
    """Kronecker-sum 5-point Laplacian, dense LU; independent of the package."""
    m = cells - 1
    h = 1.0 / cells
    T = 2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
    A = np.kron(np.eye(m), T) + np.kron(T, np.eye(m))
    U = np.zeros((cells + 1, cells + 1))
    U[1:-1, 1:-1] = np.linalg.solve(A, np.full(m * m, h * h)).reshape(m, m)
    return U


def _poisson_series(X, Y, terms: int = 199) -> np.ndarray:
    """-Delta u = 1 on the unit square, u = 0 on the edge (double sine series)."""
    u = np.zeros_like(X)
    for m in range(1, terms, 2):
        sx = np.sin(m * np.pi * X)
        for k in range(1, terms, 2):
            u += 16 / (np.pi ** 4 * m * k * (m * m + k * k)) * sx * np.sin(k * np.pi * Y)
    return u


@functools.lru_cache(maxsize=None)
def _chain(cells: int = 32):
    return _timed(lambda: ex.chain_experiment(cells))


# ----------------------------------------------------------------------------
# criteria


def test_criterion_01_maximal_fast_vs_brute():
    def run():
        worst = 0.0
        for seed in range(20):
            for cells in (16, 32):
                g = build_grid(cells)
                f = ScalarField(g, np.random.default_rng(seed).standard_normal(g.shape))
                for alpha in (0.0, 0.5, 1.0):
                    fast = frac_maximal(f, alpha).values
                    brute = frac_maximal(f, alpha, mode="brute").values
                    worst = max(worst, float(np.max(np.abs(fast - brute))))
        return worst

    worst, el = _timed(run)
    _record(1, "maximal fast == brute", worst <= 1e-12, f"max |diff| = {worst:.2e}", el, 30)


def test_criterion_02_riesz_closed_form():
    def run():
        g = build_grid(128, 2.0)
        X, Y = g.coords()
        chi = ScalarField(g, ((X - 1) ** 2 + (Y - 1) ** 2 <= 1.0).astype(float))
        return float(riesz_at(chi, 1.0, [(1.0, 1.0)])[0])

    val, el = _timed(run)
    rel = abs(val - 2 * math.pi) / (2 * math.pi)
    _record(2, "Riesz of unit disk at centre", rel <= 0.03,
            f"I_1 = {val:.4f} vs 2pi, rel err {rel:.2%}", el, 20)


def test_criterion_03_lorentz_equals_lebesgue():
    def run():
        g = build_grid(32)
        weights = [constant_weight(g), power_weight(g, (0.5, 0.55), 1.0)]
        quad = g.quad_weights()
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            f = ScalarField(g, rng.standard_normal(g.shape) * rng.uniform(0.1, 10.0))
            q = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
            for w in weights:
                direct = float(np.sum(np.abs(f.values) ** q * w.values * quad)) ** (1 / q)
                lor = lorentz_norm(f, w, LorentzParams(q, q))
                worst = max(worst, abs(lor - direct) / direct)
        return worst

    worst, el = _timed(run)
    _record(3, "Lorentz q=s equals weighted L^q", worst <= 0.01, f"max rel err {worst:.2e}", el, 20)


def test_criterion_04_luxemburg_power_identity():
    def run():
        g = build_grid(32)
        w = power_weight(g, (0.5, 0.55), -1.0)
        worst = 0.0
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            p = float(rng.uniform(1.0, 3.0))
            params = LorentzParams(float(rng.uniform(1.0, 4.0)), float(rng.uniform(1.0, 4.0)))
            f = ScalarField(g, rng.standard_normal(g.shape) * rng.uniform(0.01, 100.0))
            lux = luxemburg_norm(f, w, YoungFunction("power", p), params)
            ref = lorentz_norm(ScalarField(g, np.abs(f.values) ** p), w, params) ** (1 / p)
            worst = max(worst, abs(lux - ref) / ref)
        return worst

    worst, el = _timed(run)
    _record(4, "Luxemburg of power(p)", worst <= 1e-6, f"max rel err {worst:.2e}", el, 20)


def test_criterion_05_solver_correctness():
    def run():
        cfg = SolverConfig(tol=1e-10)
        out = {}
        errs = {}
        for cells in (32, 64):
            spec = _poisson(cells)
            sol = solve_double_obstacle(assemble(spec), cfg)
            U = sol.u.values
            if cells == 32:
                D = _dense_poisson(cells)
                out["rel_l2"] = float(np.linalg.norm(U - D) / np.linalg.norm(D))
            X, Y = spec.grid.coords()
            errs[cells] = float(np.sqrt(np.mean((U - _poisson_series(X, Y)) ** 2)))
        out["order"] = math.log2(errs[32] / errs[64])

        pin = ex.build_instance(ex.Recipe(0, obstacles="pinched"), 32)
        dp = assemble(pin.problem)
        sp = solve_double_obstacle(dp)
        out["pinched"] = bool(np.array_equal(sp.u.values, pin.problem.psi1.values)
                              and kkt_residual(sp, dp) == 0.0)
        zero = ex.build_instance(ex.Recipe(0, forcing="none"), 32)
        sz = solve_double_obstacle(assemble(zero.problem))
        out["zero"] = bool(not sz.u.values.any() and sz.iterations == 0)
        return out

    r, el = _timed(run)
    ok = r["rel_l2"] <= 1e-7 and r["order"] >= 1.8 and r["pinched"] and r["zero"]
    _record(5, "solver correctness", ok,
            f"rel L2 vs dense {r['rel_l2']:.2e}, order {r['order']:.2f}, "
            f"pinched exact {r['pinched']}, zero exact {r['zero']}", el, 120)


def test_criterion_06_comparison_chain():
    rep, el = _chain()
    recipes = {r.index: r for r in ex.chain_suite()}
    eps_h = 10 * SolverConfig().tol ** 0.5  # largest over the suite's p >= 1.8 is at p = 2
    feas_worst = -math.inf
    bad = []
    bmo_worst = 0.0
    vV_worst = 0.0
    for (iid, name), (c, f) in rep.constants.items():
        inst_index = int(iid.split("-")[0])
        recipe = recipes[inst_index]
        tol_h = 10 * SolverConfig().tol ** (1.0 / recipe.p)
        if name in ("u1_minus_psi2", "psi1_minus_u2"):
            feas_worst = max(feas_worst, c, f)
            if max(c, f) > tol_h:
                bad.append(f"{iid}:{name}")
        if recipe.coeff in ("const", "laminate"):
            if name == "delta_emp":
                bmo_worst = max(bmo_worst, c, f)
            if name == "grad_v_minus_V":
                # stored as a mean p-th power; compare the norm itself
                vV_worst = max(vV_worst, c ** (1 / recipe.p), f ** (1 / recipe.p))
    ok = not bad and bmo_worst == 0.0 and vV_worst <= 1e-10 and len(recipes) == 6
    _record(6, "comparison chain", ok,
            f"max obstacle excess {feas_worst:.1e} (eps_h ~ {eps_h:.0e}), a(x1) bmo {bmo_worst:g}, "
            f"|grad v - grad V| {vV_worst:.1e}" + (f", violations {bad}" if bad else ""), el, 300)


def test_criterion_07_reverse_hoelder():
    rep, el = _chain()
    growth = []
    finite = True
    for (iid, name), (c, f) in rep.constants.items():
        if name.startswith("RH_gamma"):
            finite &= math.isfinite(c) and math.isfinite(f)
            growth.append(f / c if c > 0 else (1.0 if f == 0 else math.inf))
    ok = finite and bool(growth) and max(growth) <= 2.0 and len(growth) == 6 * 2 * 2
    _record(7, "reverse Hoelder growth", ok,
            f"{len(growth)} constants, max growth {max(growth):.3f}", el, 300)


def test_criterion_08_good_lambda():
    rep, el = _timed(lambda: ex.good_lambda_experiment(32))
    rows_ok = all(r["verdict"] == "PASS" for r in rep.rows if r.get("quantity") == "row")
    knots_finite = all(math.isfinite(r["C_emp"]) for r in rep.rows if r.get("quantity") == "row")
    growth_ok = all(r["verdict"] == "PASS" for r in rep.rows
                    if r.get("quantity") == "refinement_growth")
    cs = [v for pair in rep.constants.values() for v in pair]
    keys = {(k[0], k[1]) for k in rep.constants}
    ok = rows_ok and knots_finite and growth_ok and len(keys) == 4 * 2 and rep.passed
    _record(8, "good-lambda", ok,
            f"{len(rep.constants)} (instance, alpha, eps) constants, max C {max(cs):.3g}, "
            f"monotone rows {rows_ok}", el, 600)


def test_criterion_09_norm_domination():
    rep, el = _timed(lambda: ex.norm_ratio_experiment(32))
    pinched = [r["value"] for r in rep.rows
               if r["instance_id"].endswith("pin") and r.get("quantity") in ("lorentz", "gradient", "orlicz")]
    stable = all(abs(f / c - 1) <= 0.5 for c, f in rep.constants.values())
    ok = rep.passed and stable and bool(pinched) and max(pinched) <= 1.02
    detail = ", ".join(f"{k} {c:.3f}->{f:.3f}" for k, (c, f) in rep.constants.items())
    _record(9, "norm domination", ok, f"{detail}; pinched max {max(pinched):.3f}", el, 600)


def test_criterion_10_pointwise_riesz():
    rep, el = _timed(lambda: ex.pointwise_experiment(32))
    pinched = [r["value"] for r in rep.rows
               if r["instance_id"].endswith("pin") and r.get("quantity", "").startswith("riesz_")]
    stable = all(abs(f / c - 1) <= 0.5 for c, f in rep.constants.values())
    ok = rep.passed and stable and bool(pinched) and max(pinched) <= 1.02
    detail = ", ".join(f"{k} {c:.3f}->{f:.3f}" for k, (c, f) in rep.constants.items())
    _record(10, "pointwise Riesz", ok, f"{detail}; pinched max {max(pinched):.3f}", el, 300)


def test_criterion_11_weak_type():
    rep, el = _timed(lambda: ex.run_weak_type(32))
    c, f = rep.constants["sup_ratio"]
    n_fields = len({r["instance_id"] for r in rep.rows if r["instance_id"].startswith("field")})
    ok = rep.passed and math.isfinite(f) and f <= 2 * c and n_fields == 10
    _record(11, "weak-type bound", ok, f"sup ratio {c:.4f} -> {f:.4f}", el, 60)


def test_criterion_12_determinism(tmp_path):
    def run():
        same = {}
        for cmd in ("exp-goodlambda", "exp-normratio", "exp-pointwise", "exp-chain"):
            texts = []
            for k in range(2):
                out = tmp_path / f"{cmd}-{k}"
                code = dispatch([cmd, "--grid", "16", "--seed", "1", "--out", str(out)])
                csvs = sorted(out.glob("*.csv"))
                texts.append((code, [p.read_bytes() for p in csvs]))
            same[cmd] = texts[0] == texts[1] and bool(texts[0][1])
        same["weak-type"] = ex.run_weak_type(16, seed=1).csv() == ex.run_weak_type(16, seed=1).csv()
        return same

    same, el = _timed(run)
    ok = all(same.values())
    _record(12, "determinism", ok,
            ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()), el, 60)


if __name__ == "__main__":
    import tempfile

    tests = [(n, fn) for n, fn in sorted(globals().items()) if n.startswith("test_criterion_")]
    for name, fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            pass
        except Exception as exc:  # report and continue with the next criterion
            RESULTS.append(f"FAIL  {name}: crashed with {exc!r}")
        print(RESULTS[-1] if RESULTS else f"FAIL  {name}: no result", flush=True)
    sys.exit(0 if RESULTS and all(r.startswith("PASS") for r in RESULTS) else 1)
