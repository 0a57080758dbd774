import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multicrit.errors import CombinatoricsTooBounded, DeltaTooLarge
from multicrit.katznelson import (
    CriterionAudit,
    audit_inequality,
    audit_lhs,
    audit_table,
    bounded_to_decomposition,
    calibrate_unbounded_constants,
    combinatorics_threshold_B,
    decompose_bounded,
    decompose_unbounded,
    refinement_depth_for_ratio,
    smallest_pigeonhole_p,
    unbounded_m_constant,
    verify_standing_hypothesis,
)
from multicrit.maps import MapSpec, evaluate, orbit_many
from multicrit.partition import extract_longest_bridge, fit_decay_rates, build_partitions
from multicrit.rotation import RotationData, RotationTarget


def test_formula_constants():
    assert unbounded_m_constant(4, 2) == 6
    assert unbounded_m_constant(1, 1) == 2
    assert unbounded_m_constant(2, 3) == 6
    assert combinatorics_threshold_B(1, 4, 2) == 25
    assert combinatorics_threshold_B(2, 1, 1) == 13
    assert combinatorics_threshold_B(1, 1, 1) == 9
    assert smallest_pigeonhole_p(1) == 3
    assert smallest_pigeonhole_p(2) == 4
    assert smallest_pigeonhole_p(5) == 5


def test_audit_hand_cases():
    r = audit_inequality(CriterionAudit(2, 10, 0.5, 0.1, eta=0.01))
    assert r.lhs == pytest.approx((0.99 * 2 - 0.1) / 1.1, abs=1e-12)
    assert r.lhs == pytest.approx(1.70909090909, abs=1e-10)
    assert r.contradiction_established
    r = audit_inequality(CriterionAudit(2, 10, 0.5, 0.1, eta=0.2))
    assert r.lhs == pytest.approx((1.6 - 2) / 1.1, abs=1e-12) and r.lhs < 0
    assert not r.contradiction_established
    with pytest.raises(DeltaTooLarge):
        audit_inequality(CriterionAudit(2, 10, 0.5, 1.2))


def test_eta_from_epsilon():
    a = CriterionAudit(3, 4, 0.2, 0.05, epsilon=0.01)
    assert a.eta == pytest.approx(0.01 * 5 / 0.2)


@given(st.floats(2, 50), st.floats(1, 50), st.floats(0.01, 0.9), st.floats(0, 1), st.floats(1e-3, 0.5))
def test_audit_monotone(b0, b1, delta, eta, step):
    assert audit_lhs(b0, b1, delta, eta + step) < audit_lhs(b0, b1, delta, eta)
    if (1 - eta) * b0 - eta * b1 > 0:  # dividing by 1 + delta shrinks positive values only
        assert audit_lhs(b0, b1, min(delta + step, 0.99), eta) <= audit_lhs(b0, b1, delta, eta)


@given(st.floats(2, 50), st.floats(1, 50), st.floats(0.01, 0.9), st.floats(0.01, 1))
def test_eta_star_is_the_crossing(b0, b1, delta, theta):
    r = audit_inequality(CriterionAudit(b0, b1, theta, delta))
    assert r.eta_star > 0
    assert audit_lhs(b0, b1, delta, r.eta_star) == pytest.approx(1.0, abs=1e-9)
    assert r.epsilon_star == pytest.approx(r.eta_star * theta / (1 + b1))


def test_audit_table_marks_bad_delta():
    rows = audit_table(2.0, 10.0, 0.5, [0.1, 1.5], [0.0, 0.01])
    assert len(rows) == 4
    assert rows[0]["established"] and not rows[2]["established"]
    assert np.isnan(rows[3]["lhs"])


def test_refinement_depth_for_ratio():
    k = refinement_depth_for_ratio(0.457, 0.790, 2.56, 3, 3.0)
    assert k == 11
    lam0, lam1, C, p, d0 = 0.457, 0.790, 2.56, 3, 3.0
    val = lambda kk: C**-3 * lam0**p * lam1 ** (-kk * (d0 - 1) - p)  # noqa: E731
    assert val(k) >= 2 and val(k - 1) < 2


def test_unbounded_decomposition(a30_critical):
    f, rot = a30_critical
    bridge = extract_longest_bridge(f, 0.0, 0, rot)
    K, C0 = calibrate_unbounded_constants(f, bridge)
    assert K > 1 and C0 > 1
    decs = [decompose_unbounded(f, 0.0, 0, rot, i=i, bridge=bridge) for i in range(rot.q[1])]
    for d in decs:
        rep = verify_standing_hypothesis(d)
        assert rep.passed
        assert d.b0 >= 2 * (1 - 1e-6)
        assert len(d.A1) == len(d.A2) == 1
        assert d.A2[0].length / d.A1[0].length <= 0.5
        assert d.mapping_time == rot.q[1] * (d.constants["m"] - 1)
        # endpoint pairing under the mapping time
        J1, J2 = d.A1[0], d.A2[0]
        img = orbit_many(f, np.array([J1.start, J1.start + J1.length]), d.mapping_time + 1)[-1]
        assert abs(((img[0] - J2.start) + 0.5) % 1 - 0.5) < 1e-9
        assert abs(((img[1] - J2.end) + 0.5) % 1 - 0.5) < 1e-9
        cover = sum(a.length for a in d.A1 + d.A2 + d.A3)
        assert cover == pytest.approx(d.ambient.length, rel=1e-9)
    b0s = [d.b0 for d in decs]
    assert max(b0s) <= 2 * min(b0s)


def test_swapped_decomposition_fails_condition_i(a30_critical):
    f, rot = a30_critical
    d = decompose_unbounded(f, 0.0, 0, rot)
    rep = verify_standing_hypothesis(d.swapped())
    assert not rep.conditions["i"]
    assert rep.conditions["iv"]


def test_formula_policy_is_too_bounded_at_a30(a30_critical):
    f, rot = a30_critical
    with pytest.raises(CombinatoricsTooBounded):
        decompose_unbounded(f, 0.0, 0, rot, m_policy="formula")


def test_unbounded_rejects_rotation():
    t = RotationTarget((2, 30), (1,))
    with pytest.raises(CombinatoricsTooBounded):
        decompose_unbounded(MapSpec.rotation(t.value), 0.0, 0, RotationData.from_target(t))


def test_bounded_decomposition(golden_critical):
    f, rot = golden_critical
    parts = build_partitions(f, 0.0, range(6, 13), rot)
    decay = fit_decay_rates(parts, 6, range(1, 7))
    n = 6
    ws = [decompose_bounded(f, 0.0, n, i, rot, decay=decay) for i in range(rot.q[n])]
    for w in ws:
        assert w.ratio >= 2.0
        assert w.p == 3 and w.k % 2 == 0
        assert not w.delta_prime.contains(w.delta_second.start)
        assert w.k_formula is not None and w.k_formula >= 1
        # D'' is the image of D' under f^{q_n}
        assert abs(((evaluate(f, w.delta_prime.start, rot.q[n]) - w.delta_second.start) + 0.5) % 1 - 0.5) < 1e-9
    thetas = [w.theta_hat for w in ws]
    assert min(thetas) > 0 and max(thetas) <= 10 * min(thetas)
    d = bounded_to_decomposition(f, ws[0], rot)
    rep = verify_standing_hypothesis(d)
    assert rep.passed and rep.conditions["iv"]
