import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpevt import induced, measure, process, seeding
from mpevt.mpmap import Interval, MapParams, evaluate, orbit, preimage_ladder

P5 = MapParams(0.5)
Y = Interval(0.5, 1.0)


@pytest.fixture(scope="module")
def mu05():
    return measure.stationary_density(measure.build_ulam(P5, 4096, 1.02))


@pytest.fixture(scope="module")
def sys05(mu05):
    return induced.induced_system(P5, mu05, Y)


def brute_return(p, x, lo, hi, cap=10**6):
    k = 2.0**p.alpha
    for r in range(1, cap):
        x = x * (1 + k * x**p.alpha) if x < 0.5 else 2 * x - 1
        if lo <= x < hi:
            return x, r
    raise RuntimeError


def test_induced_system_checks(mu05):
    s = induced.induced_system(P5, mu05)
    assert s.Y == Y
    assert s.muY_mass == pytest.approx(mu05.mass(0.5, 1.0))
    r = preimage_ladder(P5, 3).r
    induced.induced_system(P5, mu05, Interval(r[2], r[1]))
    with pytest.raises(ValueError):
        induced.induced_system(P5, mu05, Interval(0.6, 0.9))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5 + 1e-6, 1.0 - 1e-9))
def test_first_return_matches_brute_force(x):
    img, r = induced.first_return(P5, Y, x)
    bimg, br = brute_return(P5, x, 0.5, 1.0)
    assert r == br
    assert img == bimg
    assert img in Y


def test_first_return_errors():
    with pytest.raises(induced.NotInsideY):
        induced.first_return(P5, Y, 0.25)
    with pytest.raises(induced.ReturnCapExceeded):
        induced.first_return(P5, Y, 0.5 + 1e-12, cap=3)
    with pytest.raises(induced.ReturnCapExceeded):
        induced.first_return(P5, Y, 0.5)  # lands on the fixed point


def test_first_return_examples():
    assert induced.first_return(P5, Y, 0.75) == (0.5, 1)
    img, r = induced.first_return(P5, Y, 0.6)
    assert r >= 2


def test_full_branch_property():
    for a in (0.2, 0.5, 0.8):
        assert induced.full_branch_check(MapParams(a), M=30)


def test_induced_series(sys05):
    s = induced.induced_series(sys05, 0.7, 50, 0.75)
    assert np.all((s.points >= 0.5) & (s.points < 1.0))
    assert np.all(s.returns >= 1)
    o = orbit(P5, 0.7, int(s.original_times[-1]) + 1)
    np.testing.assert_allclose(o[s.original_times], s.points, rtol=0, atol=1e-12)
    assert s.values[0] == -abs(0.7 - 0.75)


def test_return_time_pmf(mu05):
    ladder = induced.return_time_pmf_ladder(P5, mu05, 8)
    hs = process.hitting_times(P5, mu05, Y, 200000, conditioned=True, seed=2)
    emp = induced.return_time_pmf_orbit(hs.valid(), 8)
    assert np.max(np.abs(ladder - emp)) < 0.01
    assert ladder[0] == pytest.approx(mu05.mass(0.75, 1.0) / mu05.mass(0.5, 1.0))


def test_kac_product(mu05):
    hs = process.hitting_times(P5, mu05, Y, 200000, conditioned=True, seed=3)
    k, se = induced.kac_product(hs.valid(), mu05.mass(0.5, 1.0))
    assert k == pytest.approx(1.0, abs=0.02)
    assert 0 < se < 0.02


def test_induced_scale_and_inside(sys05, mu05):
    e = measure.classical_thresholds(mu05, 0.75, 1.0, [1000]).entries[0]
    assert induced.induced_scale(sys05, e) == pytest.approx(e.v * sys05.muY_mass)
    induced.check_inside(sys05, e)
    e0 = measure.classical_thresholds(mu05, 0.5, 1.0, [2]).entries[0]
    with pytest.raises(induced.NotInsideY):
        induced.check_inside(sys05, e0)


def test_induced_repp_matches_original_orbit(sys05, mu05):
    # oracle: the events of the induced process are the original events along the same orbit
    zeta = 0.7
    e = measure.classical_thresholds(mu05, zeta, 1.0, [500]).entries[0]
    J = process.Window.interval(0, 3)
    y0 = 0.61
    rz = induced.induced_repp(sys05, e, zeta, J, y0)
    s = induced.induced_series(sys05, y0, process.required_length(rz.v, J), zeta)
    hits = np.flatnonzero(s.values > e.u)
    np.testing.assert_array_equal(rz.event_indices, hits)
    np.testing.assert_array_equal(rz.original_indices, s.original_times[hits])
    assert induced.induced_repp(sys05, e, zeta, process.Window(), y0).count() == 0
    with pytest.raises(induced.NotInsideY):
        induced.induced_repp(sys05, e, 0.3, J, y0)


def test_comparison_report_and_writer(sys05, mu05, tmp_path):
    zeta = 2**-0.5
    e = measure.classical_thresholds(mu05, zeta, 1.0, [2000]).entries[0]
    J = process.Window.interval(0, 2)
    rY = induced.induced_ensemble(sys05, e, zeta, J, 1, range(300))
    idx, _ = process.ball_ensemble(P5, zeta, e.eps, process.required_length(e.v, J), 1, range(300))
    rO = [process.realization_from_indices(e, i, J, r) for r, i in enumerate(idx)]
    grid = [process.Window.interval(0, 1), J, process.Window(((0, 0.5), (1, 1.5)))]
    rep = induced.compare_induced_original(rY, rO, grid, 5)
    assert rep.gaps.shape == (3, 5)
    assert 0 <= rep.sup_distance < 0.15
    assert np.all(np.diff(rep.tail_original, axis=1) <= 0)
    with pytest.raises(ValueError):
        induced.compare_induced_original(rY[:2], rO, grid)
    with pytest.raises(ValueError):
        induced.compare_induced_original(rY, rO, grid, k_max=6)
    path = induced.write_induced(rY, tmp_path / "y.csv")
    assert path.read_text().splitlines()[0].endswith("original_index")


def test_conditional_starts_in_Y():
    pts, _ = seeding.conditional_starts(P5, 3, range(50), Y)
    assert np.all((pts >= 0.5) & (pts < 1.0))


def test_tail_probabilities():
    np.testing.assert_allclose(induced.tail_probabilities([0, 1, 2, 2], 3), [0.75, 0.5, 0.0])
    assert induced.tail_probabilities([], 2).tolist() == [0.0, 0.0]


def test_periodic_point_in_Y_is_inside():
    from mpevt.mpmap import periodic_point
    rec = periodic_point(P5, "LR")
    assert rec.zeta in Y
    assert evaluate(P5, evaluate(P5, rec.zeta)) == pytest.approx(rec.zeta, abs=1e-10)
