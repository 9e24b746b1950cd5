import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpevt.mpmap import (
    BranchWord,
    DomainError,
    Interval,
    MapParams,
    derivative,
    evaluate,
    inverse_branch,
    orbit,
    periodic_point,
    preimage_ladder,
)
from mpevt.fitting import loglog_fit

P5 = MapParams(0.5)
alphas = st.floats(0.05, 0.95)


def bisect_left_inverse(alpha, y):
    # independent oracle: plain bisection on the closed form
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * (1 + 2**alpha * mid**alpha) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_params_validation():
    for bad in (0.0, 1.0, -0.1, 1.5, float("nan")):
        with pytest.raises(ValueError):
            MapParams(bad)
    assert MapParams(0.2).thm2_window
    assert not MapParams(0.3).thm2_window


def test_interval_invariant():
    with pytest.raises(ValueError):
        Interval(0.0, 0.0)
    with pytest.raises(ValueError):
        Interval(0.5, 1.5)
    iv = Interval(0.25, 0.5)
    assert 0.25 in iv and 0.5 not in iv
    assert iv.length == 0.25


def test_evaluate_examples():
    assert evaluate(P5, 0.0) == 0.0
    assert evaluate(P5, 0.5) == 0.0
    assert evaluate(P5, 0.25) == pytest.approx(0.25 * (1 + math.sqrt(2) * 0.5), abs=1e-15)
    assert evaluate(P5, 0.25) == pytest.approx(0.4267766953, abs=1e-10)


@pytest.mark.parametrize("x", [-1e-9, 1.0 + 1e-9, float("nan"), float("inf")])
def test_evaluate_domain(x):
    with pytest.raises(DomainError):
        evaluate(P5, x)
    with pytest.raises(DomainError):
        derivative(P5, x)


def test_derivative_examples():
    assert derivative(P5, 0.0) == 1.0
    assert derivative(MapParams(0.3), 0.75) == 2.0
    assert derivative(P5, 0.5) == 2.0
    h = 1e-6
    fd = (evaluate(P5, 0.25 + h) - evaluate(P5, 0.25 - h)) / (2 * h)
    assert derivative(P5, 0.25) == pytest.approx(2.0606601718, abs=1e-9)
    assert derivative(P5, 0.25) == pytest.approx(fd, rel=1e-8)


def test_inverse_examples():
    assert inverse_branch(P5, "L", 0.0) == 0.0
    assert inverse_branch(P5, "L", 1.0) == 0.5
    assert inverse_branch(P5, "R", 0.0) == 0.5
    assert inverse_branch(P5, "L", 0.5) == pytest.approx(bisect_left_inverse(0.5, 0.5), abs=1e-14)
    assert inverse_branch(P5, "L", 0.5) == pytest.approx(0.284920145, abs=1e-9)
    with pytest.raises(ValueError):
        inverse_branch(P5, "X", 0.5)


@settings(max_examples=200, deadline=None)
@given(alphas, st.floats(0.0, 1.0))
def test_inverse_roundtrip(alpha, y):
    p = MapParams(alpha)
    xl = inverse_branch(p, "L", y)
    xr = inverse_branch(p, "R", y)
    assert 0.0 <= xl <= 0.5 and 0.5 <= xr <= 1.0
    if y < 1.0:
        assert abs(evaluate(p, xl) - y) <= 1e-12
    assert abs(evaluate(p, xr) - y) <= 1e-12
    assert abs(xl - bisect_left_inverse(alpha, y)) <= 1e-14


@settings(max_examples=100, deadline=None)
@given(alphas, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_monotone_branches(alpha, x, y):
    p = MapParams(alpha)
    a, b = sorted((x, y))
    if a < b and (b < 0.5 or a >= 0.5):
        assert evaluate(p, a) < evaluate(p, b)


@settings(max_examples=100, deadline=None)
@given(alphas, st.floats(0.0, 1.0))
def test_derivative_at_least_one(alpha, x):
    d = derivative(MapParams(alpha), x)
    assert d >= 1.0
    if x > 1e-12:  # below this the excess is under one ulp
        assert d > 1.0


def test_orbit_examples():
    np.testing.assert_array_equal(orbit(P5, 0.5, 3), [0.5, 0.0, 0.0])
    np.testing.assert_array_equal(orbit(P5, 1.0, 2), [1.0, 1.0])
    o = orbit(P5, 0.25, 2)
    assert o[0] == 0.25 and o[1] == pytest.approx(0.4267766953, abs=1e-10)
    with pytest.raises(ValueError):
        orbit(P5, 0.3, 0)


def test_ladder_examples():
    r = preimage_ladder(P5, 1).r
    np.testing.assert_array_equal(r, [1.0, 0.5])
    r2 = preimage_ladder(P5, 2).r
    assert r2[2] == pytest.approx(bisect_left_inverse(0.5, 0.5), abs=1e-14)
    with pytest.raises(ValueError):
        preimage_ladder(P5, 0)


@pytest.mark.parametrize("alpha", [0.2, 0.5])
def test_ladder_spacing_exponent(alpha):
    part = preimage_ladder(MapParams(alpha), 200)
    m = np.arange(1, 201)
    sel = m >= 50
    fit = loglog_fit(m[sel], part.spacings()[sel])
    assert abs(fit.slope + (1 / alpha + 1)) < 0.1


def test_renewal_partition_structure():
    p = MapParams(0.3)
    part = preimage_ladder(p, 300)
    r = part.r
    assert np.all(np.diff(r) < 0)
    cells = part.cells()
    assert cells[0].lo == 0.5 and cells[0].hi == 1.0
    # f maps [r_{m+1}, r_m) onto [r_m, r_{m-1})
    for m in range(1, 20):
        assert evaluate(p, r[m + 1]) == pytest.approx(r[m], abs=1e-12)
    cum = np.cumsum(part.spacings())
    assert np.all(np.diff(cum) > 0)
    assert cum[-1] == pytest.approx(1.0 - r[-1], abs=1e-12)
    assert part.cell_index(0.75) == 0
    assert part.cell_index(0.4) == 1
    assert part.cell_index(r[-1] / 2) == -1


def test_branch_word():
    assert BranchWord("rl").word == "RL"
    assert BranchWord("LLL").all_left
    for bad in ("", "LX", "abc"):
        with pytest.raises(ValueError):
            BranchWord(bad)


def test_periodic_point_R():
    for a in (0.2, 0.5, 0.8):
        rec = periodic_point(MapParams(a), "R")
        assert rec.zeta == 1.0 and rec.period == 1
        assert rec.deriv == 2.0 and rec.theta == 0.5


def test_periodic_point_RL():
    rec = periodic_point(P5, BranchWord("RL"))
    assert 0.0 < rec.zeta < 0.5
    assert rec.period == 2
    z2 = evaluate(P5, evaluate(P5, rec.zeta))
    assert abs(z2 - rec.zeta) <= 1e-10
    # finite-difference derivative of f^2
    h = 1e-7
    f2 = lambda x: evaluate(P5, evaluate(P5, x))
    fd = (f2(rec.zeta + h) - f2(rec.zeta - h)) / (2 * h)
    assert rec.deriv == pytest.approx(fd, rel=1e-5)
    assert rec.theta == pytest.approx(1 - 1 / fd, rel=1e-5)
    assert 0 < rec.theta < 1


def test_periodic_point_words():
    rec = periodic_point(P5, "LR")
    assert 0.5 <= rec.zeta < 1.0
    assert rec.theta == pytest.approx(periodic_point(P5, "RL").theta, rel=1e-9)
    for w in ("RRL", "RLL", "RRRL"):
        rec = periodic_point(MapParams(0.3), w)
        pts = orbit(MapParams(0.3), rec.zeta, rec.period + 1)
        assert abs(pts[-1] - rec.zeta) <= 1e-10
        assert rec.deriv > 1


def test_all_left_rejected():
    with pytest.raises(ValueError):
        periodic_point(P5, "LL")
    with pytest.raises(ValueError):
        periodic_point(P5, "L")
