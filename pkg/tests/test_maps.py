import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicrit.errors import NotHomeomorphism, NotRegularPoint
from multicrit.maps import (
    MapSpec,
    Term,
    derivative_along,
    estimate_criticality,
    evaluate,
    inverse_step,
    lift_iterate,
    orbit,
    orbit_dd,
    orbit_many,
    schwarzian,
    validate_homeomorphism,
)

unit = st.floats(0.0, 1.0, exclude_max=True)
TWO_PI = 2 * math.pi

# DF = (2/3)(1 - cos 2 pi x)^2 has a quartic zero at 0, so the critical point is quintic.
QUINTIC = MapSpec(0.3, (Term(-(4 / 3) / TWO_PI, 1), Term((1 / 3) / (2 * TWO_PI), 2)))


def mp_lift(fmap, x):
    return x + fmap.omega + sum(
        t.amplitude * mpmath.sin(2 * mpmath.pi * t.frequency * x + t.phase) for t in fmap.terms)


def test_lift_formula():
    f = MapSpec(0.2, (Term(0.05, 1, 0.3), Term(-0.01, 3)))
    x = 0.37
    ref = x + 0.2 + 0.05 * math.sin(TWO_PI * x + 0.3) - 0.01 * math.sin(3 * TWO_PI * x)
    assert f.lift(x) == pytest.approx(ref, abs=1e-15)


@given(unit)
def test_step_agrees_with_lift(x):
    f = MapSpec.arnold(0.61)
    y, k = f.step(x)
    assert 0.0 <= y < 1.0
    assert y + k == pytest.approx(f.lift(x), abs=1e-15)


def test_derivatives_against_mpmath():
    mpmath.mp.dps = 40
    f = MapSpec(0.1, (Term(-0.1, 1, 0.2), Term(0.02, 2, 1.0)))
    for x in (0.05, 0.4, 0.83):
        for order in (1, 2, 3):
            ref = mpmath.diff(lambda t: mp_lift(f, t), mpmath.mpf(x), order)
            assert f.derivative(x, order) == pytest.approx(float(ref), rel=1e-12, abs=1e-12)


def test_schwarzian_against_mpmath():
    mpmath.mp.dps = 40
    f = MapSpec.arnold(0.4, coupling=0.8)
    for x in (0.1, 0.3, 0.77):
        d1, d2, d3 = (mpmath.diff(lambda t: mp_lift(f, t), mpmath.mpf(x), k) for k in (1, 2, 3))
        ref = d3 / d1 - mpmath.mpf(1.5) * (d2 / d1) ** 2
        assert schwarzian(f, x) == pytest.approx(float(ref), rel=1e-10)


def test_arnold_schwarzian_negative_away_from_critical_point():
    f = MapSpec.arnold(0.5)
    xs = np.linspace(0.001, 0.999, 2001)
    assert np.all(schwarzian(f, xs) < 0)
    with pytest.raises(NotRegularPoint):
        schwarzian(f, 0.0)


def test_validate_arnold_cubic():
    f = MapSpec.arnold(0.61)
    crit = validate_homeomorphism(f)
    assert len(crit) == 1
    assert crit[0].location == pytest.approx(0.0, abs=1e-9)
    assert crit[0].order == 3
    assert estimate_criticality(f, 0.0) == pytest.approx(3.0, abs=0.05)


def test_validate_quintic():
    crit = validate_homeomorphism(QUINTIC)
    assert [c.order for c in crit] == [5]


def test_validate_diffeomorphism_and_rotation():
    assert validate_homeomorphism(MapSpec.arnold(0.3, coupling=0.5)) == []
    assert validate_homeomorphism(MapSpec.rotation(0.3)) == []


def test_supercritical_is_not_homeomorphism():
    with pytest.raises(NotHomeomorphism):
        validate_homeomorphism(MapSpec.arnold(0.3, coupling=1.5))


def test_two_critical_points():
    # DF = 1 - cos(4 pi x) vanishes at 0 and 1/2
    f = MapSpec(0.2, (Term(-1 / (2 * TWO_PI), 2),))
    crit = validate_homeomorphism(f)
    assert [round(c.location, 9) for c in crit] == [0.0, 0.5]
    assert all(c.order == 3 for c in crit)


@settings(max_examples=50)
@given(unit)
def test_inverse_step_round_trip(x):
    f = MapSpec.arnold(0.37, coupling=0.6)
    y = inverse_step(f, evaluate(f, x, 1))
    assert abs(((y - x) + 0.5) % 1.0 - 0.5) < 1e-14


def test_long_inverse_round_trip_diffeomorphism():
    f = MapSpec.arnold(0.61, coupling=0.5)
    x = 0.123
    y = evaluate(f, evaluate(f, x, 10_000), -10_000)
    assert abs(((y - x) + 0.5) % 1.0 - 0.5) < 1e-9


def test_inverse_round_trip_is_conditioning_limited_for_critical_maps():
    # backward error is at most a few ulps per step divided by DF^n
    f = MapSpec.arnold(0.61)
    x = 0.37
    n = 200
    y = evaluate(f, evaluate(f, x, n), -n)
    dfn = derivative_along(f, x, n)
    bound = n * 4e-16 / min(1.0, dfn)
    assert abs(((y - x) + 0.5) % 1.0 - 0.5) <= bound


def test_orbit_variants_agree():
    f = MapSpec.arnold(0.61, coupling=0.7)
    pts, wraps = orbit(f, 0.2, 50, with_lift=True)
    assert pts[-1] == evaluate(f, 0.2, 49)
    assert pts[-1] + wraps[-1] == pytest.approx(lift_iterate(f, 0.2, 49), abs=1e-12)
    many = orbit_many(f, [0.2, 0.4], 50)
    assert np.allclose(many[:, 0], pts, atol=1e-13)
    hi, lo = orbit_dd(f, 0.2, 50)
    assert np.allclose(hi, pts, atol=1e-10)


def test_double_double_orbit_tracks_high_precision_reference():
    mpmath.mp.dps = 60
    f = MapSpec.arnold(0.61, coupling=0.5)
    hi, lo = orbit_dd(f, 0.2, 200)
    y = mpmath.mpf(0.2)
    for _ in range(199):
        y = mpmath.frac(mp_lift(f, y))
    err = abs(mpmath.mpf(hi[-1]) + mpmath.mpf(lo[-1]) - y)
    assert err < 1e-26


def test_derivative_along_matches_finite_difference():
    f = MapSpec.arnold(0.4, coupling=0.7)
    h = 1e-7
    x = 0.3
    fd = (lift_iterate(f, x + h, 5) - lift_iterate(f, x - h, 5)) / (2 * h)
    assert derivative_along(f, x, 5) == pytest.approx(fd, rel=1e-6)


def test_serialisation_and_digest():
    f = MapSpec(0.3, (Term(-0.1, 1, 0.5),))
    g = MapSpec.from_dict(f.to_dict())
    assert g.to_dict() == f.to_dict()
    assert g.digest() == f.digest()
    assert f.with_omega(0.31).digest() != f.digest()
    assert MapSpec.rotation(0.3).is_rotation


def test_reference_values():
    gamma = (math.sqrt(5) - 1) / 2
    assert evaluate(MapSpec.rotation(gamma), 0.0, 1) == pytest.approx(0.6180339887, abs=1e-10)
    f = MapSpec.arnold(0.61)
    assert evaluate(f, 0.0, 1) == pytest.approx(0.61, abs=1e-15)
    assert evaluate(f, 0.3, 0) == 0.3
    assert f.derivative(0.5, 1) == pytest.approx(2.0)
    assert f.derivative(0.5, 2) == pytest.approx(0.0, abs=1e-12)
    assert f.derivative(0.5, 3) == pytest.approx(-4 * math.pi**2)
    assert schwarzian(f, 0.5) == pytest.approx(-2 * math.pi**2)


def test_derivatives_agree_with_central_differences():
    rng = np.random.default_rng(1)
    f = MapSpec(0.13, (Term(-0.12, 1, 0.4), Term(0.03, 2, 1.1), Term(-0.005, 3)))
    xs = rng.random(1000)
    h = 1e-5
    fd1 = (f.lift(xs + h) - f.lift(xs - h)) / (2 * h)
    assert np.allclose(f.derivative(xs, 1), fd1, rtol=1e-6, atol=1e-9)
    h2 = 1e-5
    fd2 = (f.derivative(xs + h2, 1) - f.derivative(xs - h2, 1)) / (2 * h2)
    assert np.allclose(f.derivative(xs, 2), fd2, rtol=1e-6, atol=1e-6)
    fd3 = (f.derivative(xs + h2, 2) - f.derivative(xs - h2, 2)) / (2 * h2)
    assert np.allclose(f.derivative(xs, 3), fd3, rtol=1e-6, atol=1e-5)


@given(st.floats(-10, 10), unit)
def test_affine_lift_has_zero_schwarzian(omega, x):
    assert abs(schwarzian(MapSpec.rotation(omega), x)) < 1e-12


def test_schwarzian_chain_rule_for_second_iterate():
    # direct high-precision differentiation of the composed lift as the oracle
    mpmath.mp.dps = 50
    f = MapSpec.arnold(0.37, coupling=0.8)
    for x in (0.11, 0.42, 0.9):
        fx = f.lift(x)
        via_chain = f.schwarzian(fx) * f.derivative(x, 1) ** 2 + f.schwarzian(x)
        comp = lambda t: mp_lift(f, mp_lift(f, t))  # noqa: E731
        d1, d2, d3 = (mpmath.diff(comp, mpmath.mpf(x), k) for k in (1, 2, 3))
        direct = d3 / d1 - mpmath.mpf(1.5) * (d2 / d1) ** 2
        assert via_chain == pytest.approx(float(direct), abs=1e-8)
