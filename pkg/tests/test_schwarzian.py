import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicrit.errors import CoverageGap, NotRegularPoint
from multicrit.maps import MapSpec, evaluate, schwarzian
from multicrit.schwarzian import (
    critical_radius,
    first_negative_level,
    negativity_decomposition_report,
    negativity_scan,
    return_interval,
    schwarzian_iterate,
    schwarzian_terms,
)

unit = st.floats(0.0, 1.0, exclude_max=True)


def mp_lift(f, x):
    return x + f.omega + sum(t.amplitude * mpmath.sin(2 * mpmath.pi * t.frequency * x + t.phase)
                             for t in f.terms)


@given(unit, st.integers(1, 40))
def test_rotation_iterate_is_zero(x, ell):
    assert schwarzian_iterate(MapSpec.rotation(0.3), ell, x) == 0.0


@given(st.floats(0.05, 0.95))
def test_single_step_is_the_schwarzian(x):
    f = MapSpec.arnold(0.61)
    assert schwarzian_iterate(f, 1, x) == pytest.approx(schwarzian(f, x), rel=1e-14)


def test_second_iterate_against_finite_differences():
    # high-precision numerical differentiation of the composed lift
    mpmath.mp.dps = 40
    f = MapSpec.arnold(0.61)
    g = lambda t: mp_lift(f, mp_lift(f, t))  # noqa: E731
    for x in (0.5, 0.3, 0.71):
        d1, d2, d3 = (mpmath.diff(g, mpmath.mpf(x), k) for k in (1, 2, 3))
        ref = float(d3 / d1 - mpmath.mpf(1.5) * (d2 / d1) ** 2)
        assert schwarzian_iterate(f, 2, x) == pytest.approx(ref, abs=1e-5)


@settings(max_examples=30)
@given(st.floats(0.02, 0.98), st.integers(1, 64))
def test_chain_sum_matches_one_step_recursion(x, ell):
    f = MapSpec.arnold(0.3819660112501051, coupling=0.7)
    s, d, y = 0.0, 1.0, x
    for _ in range(ell):
        # S(g o f) = (Sg o f) (Df)^2 + Sf, peeled from the inside out
        s = s + f.schwarzian(y) * d * d
        d *= f.derivative(y, 1)
        y, _ = f.step(y)
    assert schwarzian_iterate(f, ell, x) == pytest.approx(s, rel=1e-9)


def test_critical_orbit_is_not_regular():
    f = MapSpec.arnold(0.61)
    with pytest.raises(NotRegularPoint) as exc:
        schwarzian_iterate(f, 5, 0.0)
    assert exc.value.step == 0


def test_partial_sums_monotone_when_all_terms_negative(golden_critical):
    f, rot = golden_critical
    scan = negativity_scan(f, 0.0, 6, rot, samples=64)
    terms, regular = schwarzian_terms(f, scan.iterate, scan.xs)
    for col in np.flatnonzero(regular):
        t = terms[:, col]
        if np.all(t <= 0):
            assert np.all(np.diff(np.cumsum(t)) <= 0)


def test_rotation_scan_is_identically_zero(golden_rotation):
    f, rot = golden_rotation
    scan = negativity_scan(f, 0.1, 5, rot)
    assert scan.identically_zero and not scan.all_negative
    r = negativity_decomposition_report(f, 0.1, 5, rot)
    assert r.sigma1 == 0.0 and r.sigma2 == 0.0


def test_critical_scans_negative(golden_critical):
    f, rot = golden_critical
    scans = {n: negativity_scan(f, 0.0, n, rot) for n in range(1, 14)}
    n0 = first_negative_level(scans)
    assert n0 is not None and n0 <= 3
    short = {n: negativity_scan(f, 0.0, n, rot, short=True) for n in range(n0, 14)}
    assert all(s.all_negative for s in short.values())
    lines = scans[5].to_csv().splitlines()
    assert lines[0] == "x,schwarzian,regular" and len(lines) == 513


def test_random_base_points_negative(golden_critical):
    f, rot = golden_critical
    for x in np.random.default_rng(7).random(32):
        for n in range(3, 12, 4):
            assert negativity_scan(f, float(x), n, rot, samples=128).all_negative


def test_return_interval_orientation(golden_critical):
    f, rot = golden_critical
    for n in (4, 5):
        I, ell = return_interval(f, 0.0, n, rot)
        assert ell == rot.q[n + 1]
        other = evaluate(f, 0.0, rot.q[n])
        ends = sorted([I.start, I.end])
        assert ends == pytest.approx(sorted([0.0, other]), abs=1e-15)
        # even levels put I_n to the right of the base point
        assert (I.start == 0.0) == (n % 2 == 0)


def test_split_report(golden_critical):
    f, rot = golden_critical
    assert critical_radius(f) == 0.25
    with pytest.raises(CoverageGap):
        negativity_decomposition_report(f, 0.0, 1, rot)
    reports = {n: negativity_decomposition_report(f, 0.0, n, rot) for n in range(3, 15)}
    ratios = [reports[n].ratio for n in sorted(reports)]
    assert all(r.sigma1 < 0 for r in reports.values())
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 0.01 and not reports[14].pre_asymptotic
    # |Sigma1| grows like |I_n|^-2
    lens = [return_interval(f, 0.0, n, rot)[0].length for n in sorted(reports)]
    slope = np.polyfit(np.log(lens), np.log([-reports[n].sigma1 for n in sorted(reports)]), 1)[0]
    assert -2.5 <= slope <= -1.5
