import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from reglab.geometry import Ball, build_grid, cells_in_ball, dyadic_scales, lattice_disk_count
from reglab.weights import (ainf_samples, ball_family, coefficient_field, constant_weight,
                            dyadic_ball_family, estimate_Ainf, estimate_Ap, fit_ainf_envelope,
                            partial_bmo_seminorm, power_weight, weighted_measure)

FIT = [(0.5, 0.5), (0.3, 0.6), (0.6, 0.4)]


def test_power_weight_examples():
    g = build_grid(32)
    assert np.all(power_weight(g, (0.5, 0.5), 0.0).values == 1.0)
    assert power_weight(g, (0.5, 0.5), 1.0).values[8, 16] == pytest.approx(0.25, abs=1e-15)
    assert power_weight(g, (0.5, 0.5), -1.0).values[16, 16] == pytest.approx(2 / g.h, rel=1e-14)
    with pytest.raises(ValueError):
        power_weight(g, (0.5, 0.5), 4.0)


def test_weighted_measure_trivial():
    g = build_grid(32)
    one = constant_weight(g)
    assert abs(weighted_measure(one, np.ones(g.shape, bool)) - 1.0) <= g.h
    assert weighted_measure(one, np.zeros(g.shape, bool)) == 0.0


def test_weighted_measure_against_quadrature():
    oracle, _ = dblquad(lambda y, x: math.hypot(x, y), 0, 1, 0, 1, epsabs=1e-12)
    assert oracle == pytest.approx(0.7652, abs=1e-4)
    g = build_grid(64)
    val = weighted_measure(power_weight(g, (0.0, 0.0), 1.0), np.ones(g.shape, bool))
    assert abs(val - oracle) <= 0.02 * oracle


@given(st.integers(0, 2 ** 31 - 1), st.floats(-1.5, 1.5))
def test_weighted_measure_additive_and_monotone(seed, gamma):
    g = build_grid(16)
    w = power_weight(g, (0.3, 0.7), gamma)
    rng = np.random.default_rng(seed)
    A = rng.random(g.shape) < 0.4
    B = (rng.random(g.shape) < 0.4) & ~A
    mA, mB, mAB = (weighted_measure(w, A), weighted_measure(w, B), weighted_measure(w, A | B))
    assert mAB == pytest.approx(mA + mB, rel=1e-12, abs=1e-15)
    assert mA <= mAB + 1e-15


def test_Ap_constant_weight_is_one():
    g = build_grid(32)
    fam = dyadic_ball_family(g, FIT, 0.25)
    for c in (1.0, 3.7, 0.01):
        assert estimate_Ap(constant_weight(g, c), 2.0, fam) == pytest.approx(1.0, rel=0.01)
        assert estimate_Ap(constant_weight(g, c), 3.0, fam) == pytest.approx(1.0, rel=0.01)


def _Ap_two_resolutions(gamma, p=2.0):
    out = []
    for n in (64, 128):
        g = build_grid(n)
        fam = dyadic_ball_family(g, [(0.5, 0.5), (0.25, 0.25), (0.75, 0.5)], 0.25)
        out.append(estimate_Ap(power_weight(g, (0.5, 0.5), gamma), p, fam))
    return out


def test_Ap_inside_range_is_refinement_stable():
    c, f = _Ap_two_resolutions(1.0)
    assert math.isfinite(c) and abs(f / c - 1) <= 0.10


def test_Ap_endpoint_keeps_growing():
    # gamma = -2 sits on the edge of A_2; the product grows like log(1/h), not geometrically
    c, f = _Ap_two_resolutions(-2.0)
    c1, f1 = _Ap_two_resolutions(1.0)
    assert f / c > 1.1
    assert f / c > f1 / c1 + 0.1


@pytest.mark.xfail(strict=True, reason="growth is logarithmic, about 1.15x per halving of h")
def test_Ap_endpoint_grows_by_half():
    c, f = _Ap_two_resolutions(-2.0)
    assert f / c >= 1.5


def test_Ap_translation_invariance():
    g = build_grid(64)
    shift = 12 * g.h
    fam = ball_family(g, [(0.4, 0.5), (0.35, 0.45)], dyadic_scales(0.25, 4 * g.h))
    moved = [Ball((b.center[0] + shift, b.center[1]), b.radius) for b in fam]
    a = estimate_Ap(power_weight(g, (0.4, 0.5), 1.0), 2.0, fam)
    b = estimate_Ap(power_weight(g, (0.4 + shift, 0.5), 1.0), 2.0, moved)
    assert b == pytest.approx(a, rel=0.01)


def test_Ap_preconditions():
    g = build_grid(32)
    with pytest.raises(ValueError):
        estimate_Ap(constant_weight(g), 2.0, [])
    with pytest.raises(ValueError):
        estimate_Ap(constant_weight(g), 2.0, [Ball((0.5, 0.5), g.h)])
    with pytest.raises(ValueError):
        estimate_Ap(constant_weight(g), 1.0, [Ball((0.5, 0.5), 0.25)])


def test_Ainf_constant_weight():
    g = build_grid(32)
    c0, nu = estimate_Ainf(constant_weight(g), dyadic_ball_family(g, FIT, 0.5), 32, 0)
    assert c0 == pytest.approx(1.0, rel=0.05) and nu == pytest.approx(1.0, rel=0.05)


def test_Ainf_envelope_holds_on_fresh_sample():
    g = build_grid(32)
    w = power_weight(g, (0.5, 0.5), 1.0)
    fam = dyadic_ball_family(g, FIT, 0.5)
    c0, nu = estimate_Ainf(w, fam, 32, seed=0)
    assert w.a_inf == (c0, nu) and 0 < nu <= 1 and c0 >= 1
    r, m = ainf_samples(w, fam, 64, seed=12345)
    assert np.all(m <= c0 * r ** nu * (1 + 1e-12))


def test_Ainf_singular_weight_has_smaller_nu():
    g = build_grid(32)
    fam = dyadic_ball_family(g, FIT, 0.5)
    _, nu_one = estimate_Ainf(constant_weight(g), fam, 32, 0)
    _, nu_sing = estimate_Ainf(power_weight(g, (0.5, 0.5), -1.0), fam, 32, 0)
    assert nu_sing < nu_one


def test_Ainf_degenerate_and_preconditions():
    with pytest.raises(ValueError):
        fit_ainf_envelope(np.ones(5), np.ones(5))
    g = build_grid(32)
    with pytest.raises(ValueError):
        estimate_Ainf(constant_weight(g), dyadic_ball_family(g, FIT, 0.5), 8, 0)


def test_coefficient_structure_bounds():
    g = build_grid(8)
    with pytest.raises(ValueError):
        coefficient_field(g, 2.0, a=-1.0)
    cf = coefficient_field(g, 2.0, a=lambda X, Y: 1 + X, b=0.5)
    assert cf.L == pytest.approx(2.0)


def test_bmo_zero_for_constant_and_x1_laminate():
    g = build_grid(32)
    assert partial_bmo_seminorm(coefficient_field(g, 2.0, 1.7), 0.25) == 0.0
    steps = coefficient_field(g, 3.0, lambda X, Y: 1 + 0.5 * (X > 0.43) + 0.25 * (X > 0.71))
    assert partial_bmo_seminorm(steps, 0.25) == 0.0
    with pytest.raises(ValueError):
        partial_bmo_seminorm(steps, 2 * g.h)


def _bmo_brute(a, h, r0):
    """Plain double loop over centre nodes and dyadic radii."""
    n1 = a.shape[0]
    J, I = np.indices(a.shape)
    best = 0.0
    rho = r0
    while rho >= 2 * h * (1 - 1e-12):
        R = rho / h
        half = int(math.floor(R + 1e-9))
        for jc in range(n1):
            rows = slice(max(jc - half, 0), min(jc + half, n1 - 1) + 1)
            abar = a[rows, :].mean(axis=0)
            theta = np.abs(a - abar[None, :])
            for ic in range(n1):
                ball = (J - jc) ** 2 + (I - ic) ** 2 <= R * R * (1 + 1e-9)
                best = max(best, float(theta[ball].mean()))
        rho /= 2
    return best


def test_bmo_matches_brute_force():
    g = build_grid(16)
    cf = coefficient_field(g, 2.0, lambda X, Y: 1 + 0.1 * np.sin(2 * np.pi * Y))
    val = partial_bmo_seminorm(cf, 0.25)
    assert val > 0
    assert abs(val - _bmo_brute(cf.a, g.h, 0.25)) <= 1e-12


@given(st.integers(0, 10_000))
def test_bmo_invariant_under_x1_functions(seed):
    g = build_grid(16)
    rng = np.random.default_rng(seed)
    base = 1 + 0.2 * rng.random(g.shape)
    f = rng.random(g.shape[1])
    a = coefficient_field(g, 2.0, base)
    b = coefficient_field(g, 2.0, base + f[None, :])
    assert abs(partial_bmo_seminorm(a, 0.25) - partial_bmo_seminorm(b, 0.25)) <= 1e-12


def test_lattice_count_used_for_disks():
    # sanity link between ball masks and the lattice disk table
    g = build_grid(32)
    m = cells_in_ball(g, Ball((0.5, 0.5), 0.25))
    assert int(m.sum()) == lattice_disk_count(0.25 / g.h)
