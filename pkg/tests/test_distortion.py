import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicrit.core import CircleInterval
from multicrit.distortion import (
    CrossRatioPair,
    c1_bounds_check,
    chebyshev_points,
    cross_ratio,
    cross_ratio_distortion,
    intersection_multiplicity,
    koebe_bound,
    koebe_distortion_report,
    one_step_factors,
    orbit_family,
    symmetric_return_check,
    verify_cross_ratio_inequality,
)
from multicrit.errors import (
    IterateNotInjectiveOnT,
    MultiplicityExceeded,
    NotCompactlyContained,
    NotDiffeomorphicOnT,
)
from multicrit.maps import MapSpec, evaluate, inverse_step

pieces = st.floats(1e-4, 0.3)
unit = st.floats(0.0, 1.0, exclude_max=True)


def test_cross_ratio_examples():
    assert cross_ratio(CrossRatioPair.from_lengths(0.1, 0.1, 0.1, 0.1)) == pytest.approx(0.25)
    assert cross_ratio(CrossRatioPair.from_lengths(0.1, 0.2, 0.1, 0.2)) == pytest.approx(4 / 9)
    tiny = cross_ratio(CrossRatioPair.from_lengths(0.1, 1e-9, 0.1, 0.1))
    assert 0 < tiny < 1e-8


def test_cross_ratio_requires_nesting():
    with pytest.raises(NotCompactlyContained):
        CrossRatioPair(CircleInterval(0.1, 0.3), CircleInterval(0.1, 0.5))


@given(unit, pieces, pieces, pieces)
def test_cross_ratio_in_unit_interval(s, a, b, c):
    v = cross_ratio(CrossRatioPair.from_lengths(s, a, b, c))
    assert 0 < v < 1


# pieces of at least 1e-3 keep the two-ulp rounding of each gap below 1e-12 relative
@given(unit, st.floats(1e-3, 0.3), st.floats(1e-3, 0.3), st.floats(1e-3, 0.3),
       st.integers(0, 50), st.floats(-3, 3))
def test_rotation_preserves_cross_ratio(s, a, b, c, j, omega):
    pair = CrossRatioPair.from_lengths(s, a, b, c)
    assert cross_ratio_distortion(MapSpec.rotation(omega), j, pair) == pytest.approx(1.0, abs=1e-12)


@settings(deadline=None, max_examples=30)
@given(unit, st.floats(1e-4, 0.05), st.floats(1e-4, 0.05), st.floats(1e-4, 0.05), st.integers(1, 1000))
def test_chain_rule_factorisation(s, a, b, c, j):
    f = MapSpec.arnold(0.3819660112501051, coupling=0.6)
    pair = CrossRatioPair.from_lengths(s, a, b, c)
    total = cross_ratio_distortion(f, j, pair)  # raises internally on a 1e-10 mismatch
    prod = float(np.prod(one_step_factors(f, pair, j)))
    assert prod == pytest.approx(total, rel=1e-10)


def test_critical_map_expands_cross_ratio_near_critical_point():
    f = MapSpec.arnold(0.61)
    pair = CrossRatioPair.from_lengths(-0.05, 0.04, 0.02, 0.04)
    assert cross_ratio_distortion(f, 1, pair) > 1.0
    assert cross_ratio_distortion(f, 0, pair) == 1.0


def test_orientation_reversal_is_rejected():
    # lifts of homeomorphisms cannot fold T, so use a non-monotone lift
    f = MapSpec.arnold(0.3, coupling=1.5)
    pair = CrossRatioPair.from_lengths(-0.05, 0.03, 0.04, 0.03)
    with pytest.raises(IterateNotInjectiveOnT):
        cross_ratio_distortion(f, 1, pair)


def test_multiplicity_sweep():
    I = [CircleInterval(0.1, 0.4), CircleInterval(0.3, 0.6), CircleInterval(0.35, 0.5),
         CircleInterval(0.9, 0.2)]
    assert intersection_multiplicity(I) == 3
    assert intersection_multiplicity([CircleInterval(0.0, 0.5), CircleInterval(0.5, 0.0)]) == 1


def test_cross_ratio_inequality_families(golden_critical, golden_rotation):
    rf, rrot = golden_rotation
    prod, chat = verify_cross_ratio_inequality(rf, orbit_family(rf, 0.0, 6, rrot), 3)
    assert prod == pytest.approx(1.0, abs=1e-9)
    f, rot = golden_critical
    pair = CrossRatioPair.from_lengths(0.2, 0.01, 0.01, 0.01)
    single, c1 = verify_cross_ratio_inequality(f, [pair], 1)
    assert single == pytest.approx(cross_ratio_distortion(f, 1, pair))
    chats = []
    for n in range(5, 12):
        fam = orbit_family(f, 0.0, n, rot)
        assert intersection_multiplicity([p.T for p in fam]) <= 3
        prod, chat = verify_cross_ratio_inequality(f, fam, 3)
        assert math.isfinite(prod)
        chats.append(chat)
    assert max(chats) <= 2 * min(chats)
    with pytest.raises(MultiplicityExceeded):
        verify_cross_ratio_inequality(f, orbit_family(f, 0.0, 6, rot), 1)


def test_chebyshev_points_include_endpoints():
    xs = chebyshev_points(0.2, 0.1, 16)
    assert len(xs) == 18 and xs[0] == 0.2 and xs[-1] == pytest.approx(0.3)
    assert np.all(np.diff(xs) > 0)


def test_koebe_rotation_and_zero_iterate():
    M = CircleInterval(0.4, 0.5)
    T = CircleInterval(0.3, 0.7)
    rep = koebe_distortion_report(MapSpec.rotation(0.123), 17, M, T)
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.ratio <= rep.bound(0.0)
    assert koebe_distortion_report(MapSpec.arnold(0.61), 0, M, T).ratio == 1.0


def test_koebe_rejects_critical_orbit(golden_critical):
    f, _ = golden_critical
    with pytest.raises(NotDiffeomorphicOnT):
        koebe_distortion_report(f, 3, CircleInterval(0.98, 0.02), CircleInterval(0.95, 0.05))


def test_koebe_formula():
    assert koebe_bound(1.0, 0.0, 5.0) == 4.0
    assert koebe_bound(0.5, 2.0, 0.1) == pytest.approx(9 * math.exp(0.2))


def test_c1_bounds(golden_critical, golden_rotation):
    rf, rrot = golden_rotation
    assert c1_bounds_check(rf, 0.3, 6, rrot).k_hat == pytest.approx(1.0, abs=1e-9)
    assert c1_bounds_check(rf, 0.3, 6, rrot, short=True).k_hat == pytest.approx(1.0, abs=1e-9)
    f, rot = golden_critical
    # the constant is uniform in the base point, so compare suprema over a sample
    xs = np.random.default_rng(0).random(32)
    ks = [max(c1_bounds_check(f, x, n, rot).k_hat for x in xs) for n in range(5, 13)]
    assert all(1.0 <= k < 20 for k in ks)
    assert max(ks) <= 2 * min(ks)


def test_symmetric_return(golden_critical, golden_rotation):
    rf, rrot = golden_rotation
    assert symmetric_return_check(rf, 0.3, 5, rrot) == pytest.approx(1.0, abs=1e-9)
    f, rot = golden_critical
    x = 0.4
    wrapped = lambda d: abs((d + 0.5) % 1.0 - 0.5)  # noqa: E731
    direct = wrapped(evaluate(f, x, 1) - x) / wrapped(x - inverse_step(f, x))
    assert symmetric_return_check(f, x, 0, rot) == pytest.approx(direct)
    xs = np.random.default_rng(3).random(1000)
    for n in (4, 8, 12):
        r = symmetric_return_check(f, xs, n, rot)
        assert np.all(r > 0.2) and np.all(r < 5.0)
