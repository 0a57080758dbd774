"""Individual verification checks run by the command line orchestrator.

Every check takes a :class:`RunContext` and returns a :class:`CheckResult`.
Checks never raise: library errors become failed records.  Constants whose
size is only known to exist come back as fixture requests, which the
orchestrator resolves against the fixture store in a single process.
"""

from __future__ import annotations

import math
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from . import distortion as dist
from . import katznelson as kz
from . import measure as ms
from . import partition as pt
from . import schwarzian as sw
from .core import CircleInterval, PrecisionPolicy
from .errors import CombinatoricsTooBounded, MulticritError, TooShortForFit
from .maps import MapSpec, evaluate, orbit
from .rotation import RotationData, RotationTarget, combinatorial_order_matches

PASS = "pass"
FAIL = "fail"
DEGRADED = "precision-degraded"
NOT_APPLICABLE = "not-applicable"

ALL_CHECKS = (
    "partition", "realbounds", "crossratio", "koebe", "c1bounds", "schwarzian",
    "yoccoz", "katznelson-unbounded", "katznelson-bounded", "audit", "measure",
)

ANCHORS = {
    "partition": "dynamical partitions of the circle",
    "realbounds": "real bounds for adjacent atoms",
    "crossratio": "cross-ratio inequality",
    "koebe": "Koebe distortion principle",
    "c1bounds": "C1 bounds for first return maps",
    "schwarzian": "negative Schwarzian of return maps",
    "yoccoz": "Yoccoz lemma for almost parabolic maps",
    "katznelson-unbounded": "standing hypothesis, unbounded combinatorics",
    "katznelson-bounded": "standing hypothesis, bounded combinatorics",
    "audit": "Katznelson contradiction inequality",
    "measure": "singularity of the invariant measure",
}


@dataclass
class RunContext:
    fmap: MapSpec
    target: RotationTarget
    levels: tuple[int, int]
    precision: PrecisionPolicy
    base_points: int = 32
    seed: int = 0
    bounded_levels: tuple[int, ...] | None = None
    max_i: int = 64
    delta: float = 0.05

    def rotation(self) -> RotationData:
        return RotationData.from_target(self.target, max(60, self.levels[1] + 20))

    @property
    def level_range(self) -> range:
        return range(self.levels[0], self.levels[1] + 1)

    @property
    def critical(self) -> float:
        cps = self.fmap.critical_points
        return cps[0].location if cps else 0.0

    def random_points(self) -> np.ndarray:
        return np.random.default_rng(self.seed).random(self.base_points)


@dataclass
class CheckResult:
    name: str
    status: str
    constants: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    series: dict | None = None
    fixtures: list = field(default_factory=list)  # (level, constant name, value, mode)
    notes: list = field(default_factory=list)
    runtime: float = 0.0


def _num(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, CircleInterval):
        return {"start": obj.start, "length": obj.length}
    obj = _num(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# -- checks --------------------------------------------------------------------


def check_partition(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    lo, hi = ctx.levels
    parts = pt.build_partitions(ctx.fmap, ctx.critical, range(lo, hi + 1), rot, ctx.precision)
    certified = [n for n in sorted(parts) if not parts[n].degraded]
    tiling = {n: pt.check_tiling(parts[n]) for n in parts}
    for n in range(lo, hi):
        pt.nesting_map(parts[n], parts[n + 1])
    order_ok = combinatorial_order_matches(ctx.fmap, rot, certified[-1] if certified else lo, ctx.critical)
    ok = all(tiling.values()) and order_ok
    status = PASS if ok else FAIL
    if ok and len(certified) < len(parts):
        status = DEGRADED
    series = {"columns": ["level", "atoms", "min_length", "sum_minus_one"],
              "rows": [[n, len(parts[n].atoms), parts[n].min_length,
                        float(parts[n].lengths.sum() - 1.0)] for n in sorted(parts)]}
    return CheckResult("partition", status,
                       {"max_certified_level": max(certified) if certified else None,
                        "combinatorial_order_matches": order_ok},
                       {"tiling": tiling}, series)


def check_realbounds(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    levels = list(ctx.level_range)
    parts = pt.build_partitions(ctx.fmap, ctx.critical, levels, rot, ctx.precision)
    at_crit = {n: pt.adjacency_ratio_report(parts[n]) for n in levels}
    random_max = {}
    for x in ctx.random_points():
        ps = pt.build_partitions(ctx.fmap, float(x), levels, rot, ctx.precision)
        for n in levels:
            random_max[n] = max(random_max.get(n, 0.0), pt.adjacency_ratio_report(ps[n])[0])
    fixtures = [(n, "critical_ratio", at_crit[n][0], "within") for n in levels]
    fixtures += [(n, "random_ratio", random_max[n], "within") for n in levels]
    series = {"columns": ["level", "critical_ratio", "random_max_ratio"],
              "rows": [[n, at_crit[n][0], random_max[n]] for n in levels]}
    status = DEGRADED if any(parts[n].degraded for n in levels) else PASS
    return CheckResult("realbounds", status,
                       {"max_critical_ratio": max(r[0] for r in at_crit.values()),
                        "max_random_ratio": max(random_max.values())},
                       {"critical_witness": {n: list(at_crit[n][1]) for n in levels}},
                       series, fixtures)


def check_crossratio(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    rows = []
    fixtures = []
    for n in ctx.level_range:
        fam = dist.orbit_family(ctx.fmap, ctx.critical, n, rot)
        mult = dist.intersection_multiplicity([p.T for p in fam])
        prod, chat = dist.verify_cross_ratio_inequality(ctx.fmap, fam, 3)
        rows.append([n, mult, prod, chat])
        fixtures.append((n, "C_hat", chat, "within"))
    pair = dist.CrossRatioPair.from_lengths(0.3, 0.01, 0.01, 0.01)
    crd = dist.cross_ratio_distortion(ctx.fmap, 200, pair)  # raises on chain rule mismatch
    return CheckResult("crossratio", PASS, {"sample_crd_200": crd,
                                            "max_C_hat": max(r[3] for r in rows)}, {},
                       {"columns": ["level", "multiplicity", "product", "C_hat"], "rows": rows},
                       fixtures)


def _koebe_instance(fmap: MapSpec, c: float, n: int, rot: RotationData):
    """M around the critical value inside T = f(I_{n+1}(c)) u f(I_n(c)), k = q_n - 1."""
    q0, q1 = rot.q[n], rot.q[n + 1]
    c1 = evaluate(fmap, c, 1)
    a = evaluate(fmap, c, q1 + 1)
    b = evaluate(fmap, c, q0 + 1)
    T = CircleInterval(a, b) if n % 2 == 0 else CircleInterval(b, a)
    left = (c1 - T.start) % 1.0
    right = T.length - left
    M = CircleInterval.from_start_length(c1 - left / 2, (left + right) / 2)
    return M, T, max(q0 - 1, 0)


def check_koebe(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    levels = list(ctx.level_range)
    reports = {}
    for n in levels:
        M, T, k = _koebe_instance(ctx.fmap, ctx.critical, n, rot)
        reports[n] = dist.koebe_distortion_report(ctx.fmap, k, M, T)
    half = max(1, len(levels) // 2)
    calib = levels[:half]
    held = levels[half:]
    c0 = max(reports[n].c0_fit for n in calib)
    ok = all(reports[n].ratio <= reports[n].bound(c0) * (1 + 1e-12) for n in held)
    rows = [[n, r.ratio, r.tau, r.ell, r.bound(c0)] for n, r in reports.items()]
    return CheckResult("koebe", PASS if ok else FAIL,
                       {"C0_fit": c0, "calibration_levels": calib, "held_out_levels": held},
                       {}, {"columns": ["level", "ratio", "tau", "ell", "bound"], "rows": rows},
                       [(n, "ratio", reports[n].ratio, "at_most") for n in levels])


def check_c1bounds(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    rows, fixtures = [], []
    pts = [ctx.critical] + [float(x) for x in ctx.random_points()]
    for n in ctx.level_range:
        k_long = max(dist.c1_bounds_check(ctx.fmap, x, n, rot).k_hat for x in pts)
        k_short = max(dist.c1_bounds_check(ctx.fmap, x, n, rot, short=True).k_hat for x in pts)
        sym = dist.symmetric_return_check(ctx.fmap, ctx.random_points(), n, rot)
        c_sym = float(max(sym.max(), 1.0 / sym.min()))
        rows.append([n, k_long, k_short, c_sym])
        fixtures += [(n, "K_hat", k_long, "within"), (n, "K_hat_short", k_short, "within"),
                     (n, "symmetric_C", c_sym, "within")]
    return CheckResult("c1bounds", PASS, {"max_K_hat": max(r[1] for r in rows)}, {},
                       {"columns": ["level", "K_hat", "K_hat_short", "symmetric_C"], "rows": rows},
                       fixtures)


def check_schwarzian(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    levels = list(ctx.level_range)
    scans = {n: sw.negativity_scan(ctx.fmap, ctx.critical, n, rot) for n in levels}
    if all(s.identically_zero for s in scans.values()):
        return CheckResult("schwarzian", PASS, {"identically_zero": True}, {},
                           {"columns": ["x", "schwarzian"],
                            "rows": [[float(x), 0.0] for x in scans[levels[-1]].xs[:16]]},
                           notes=["affine map: Schwarzian identically zero"])
    n0 = sw.first_negative_level(scans)
    short_ok = n0 is not None and all(
        sw.negativity_scan(ctx.fmap, ctx.critical, n, rot, short=True).all_negative
        for n in levels if n >= n0)
    random_ok = True
    worst = -math.inf
    for x in ctx.random_points():
        for n in levels:
            if n0 is None or n < n0:
                continue
            s = sw.negativity_scan(ctx.fmap, float(x), n, rot)
            worst = max(worst, s.max_value)
            random_ok &= s.all_negative
    split = {}
    for n in levels:
        try:
            r = sw.negativity_decomposition_report(ctx.fmap, ctx.critical, n, rot)
            split[n] = {"sigma1": r.sigma1, "sigma2": r.sigma2, "ratio": r.ratio,
                        "pre_asymptotic": r.pre_asymptotic}
        except MulticritError as e:
            split[n] = {"error": type(e).__name__}
    ok = n0 is not None and random_ok and short_ok
    last = scans[levels[-1]]
    rows = [[float(x), float(v)] for x, v, r in zip(last.xs, last.values, last.regular) if r]
    fixtures = [("all", "first_negative_level", float(n0 if n0 is not None else -1) + 1.0, "within")]
    return CheckResult("schwarzian", PASS if ok else FAIL,
                       {"first_negative_level": n0, "random_points_negative": bool(random_ok),
                        "short_variant_negative": bool(short_ok),
                        "max_value_random": worst,
                        "max_value_critical": {n: scans[n].max_value for n in levels}},
                       {"split": split}, {"columns": ["x", "schwarzian"], "rows": rows}, fixtures)


def _unbounded_level(rot: RotationData, levels, min_a: int = 12):
    """Level n in range whose a_{n+1} is largest and at least ``min_a``."""
    best = None
    for n in range(0, levels[-1] + 1):
        a = rot.a(n + 1)
        if a >= min_a and (best is None or a > rot.a(best + 1)):
            best = n
    return best


def check_yoccoz(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    if not ctx.fmap.critical_points:
        return CheckResult("yoccoz", NOT_APPLICABLE, notes=["no critical point"])
    n = _unbounded_level(rot, list(ctx.level_range))
    if n is None:
        return CheckResult("yoccoz", NOT_APPLICABLE,
                           notes=["no partial quotient large enough for a bridge of length 10"])
    bridge = pt.extract_longest_bridge(ctx.fmap, ctx.critical, n, rot)
    try:
        fit = pt.verify_yoccoz_scaling(bridge)
    except TooShortForFit as e:
        return CheckResult("yoccoz", NOT_APPLICABLE, notes=[str(e)])
    ok = -2.3 <= fit.slope <= -1.7
    return CheckResult("yoccoz", PASS if ok else FAIL,
                       {"level": n, "a": bridge.a, "ell": fit.ell, "slope": fit.slope,
                        "C_sigma": fit.c_sigma, "sigma": fit.sigma},
                       {"spots": bridge.spots},
                       {"columns": ["k", "length", "min_k"], "rows": [list(r) for r in fit.rows]},
                       [(n, "C_sigma", fit.c_sigma, "within")])


def _unbounded_decompositions(ctx: RunContext, rot: RotationData):
    n = _unbounded_level(rot, list(ctx.level_range), min_a=3)
    if n is None or not ctx.fmap.critical_points:
        return None, []
    bridge = pt.extract_longest_bridge(ctx.fmap, ctx.critical, n, rot)
    qn1 = rot.q[n + 1]
    decs = []
    for i in sorted({0, qn1 - 1}):
        decs.append(kz.decompose_unbounded(ctx.fmap, ctx.critical, n, rot, i=i, bridge=bridge))
    return n, decs


def check_katznelson_unbounded(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    try:
        n, decs = _unbounded_decompositions(ctx, rot)
    except CombinatoricsTooBounded as e:
        return CheckResult("katznelson-unbounded", NOT_APPLICABLE, notes=[str(e)])
    if not decs:
        return CheckResult("katznelson-unbounded", NOT_APPLICABLE,
                           notes=["needs a critical point and some a_(n+1) >= 3 in range"])
    reps = [kz.verify_standing_hypothesis(d) for d in decs]
    b0 = [r.b0 for r in reps]
    spread_ok = max(b0) <= 2 * min(b0)
    ok = all(r.passed for r in reps) and spread_ok
    cons = {"level": n, "b0": min(b0), "b1": max(r.b1 for r in reps),
            "theta": min(r.theta for r in reps), "m": decs[0].constants["m"],
            "formula_m": decs[0].constants["formula_m"], "B": decs[0].constants["B"],
            "K": decs[0].constants["K"], "C0": decs[0].constants["C0"],
            "mapping_time": decs[0].mapping_time}
    wit = {f"i={d.constants['i']}": {"J1": d.A1[0], "J2": d.A2[0], "conditions": r.conditions}
           for d, r in zip(decs, reps)}
    return CheckResult("katznelson-unbounded", PASS if ok else FAIL, cons, wit, None,
                       [(n, "theta", cons["theta"], "at_least")])


def _bounded_levels(ctx: RunContext) -> list[int]:
    if ctx.bounded_levels:
        return list(ctx.bounded_levels)
    lo = ctx.levels[0]
    return [lo, lo + 1, lo + 2]


def check_katznelson_bounded(ctx: RunContext) -> CheckResult:
    if not ctx.fmap.critical_points:
        return CheckResult("katznelson-bounded", NOT_APPLICABLE, notes=["no critical point"])
    rot = ctx.rotation()
    rows, fixtures = [], []
    all_ok = True
    for n in _bounded_levels(ctx):
        ws = [kz.decompose_bounded(ctx.fmap, ctx.critical, n, i, rot)
              for i in range(min(rot.q[n], ctx.max_i))]
        ratio = min(w.ratio for w in ws)
        K = max(w.K_hat for w in ws)
        theta = min(w.theta_hat for w in ws)
        all_ok &= ratio >= 2.0
        rows.append([n, len(ws), ratio, K, theta, sorted({w.k for w in ws})])
        fixtures += [(n, "K_hat", K, "at_most"), (n, "theta_hat", theta, "at_least")]
    return CheckResult("katznelson-bounded", PASS if all_ok else FAIL,
                       {"min_ratio": min(r[2] for r in rows), "max_K_hat": max(r[3] for r in rows),
                        "min_theta": min(r[4] for r in rows)}, {},
                       {"columns": ["level", "count", "min_ratio", "K_hat", "theta_hat", "k_values"],
                        "rows": rows}, fixtures)


def check_audit(ctx: RunContext) -> CheckResult:
    if not ctx.fmap.critical_points:
        return CheckResult("audit", NOT_APPLICABLE, notes=["no critical point"])
    rot = ctx.rotation()
    source = "unbounded"
    try:
        _, decs = _unbounded_decompositions(ctx, rot)
    except CombinatoricsTooBounded:
        decs = []
    if decs:
        reps = [kz.verify_standing_hypothesis(d) for d in decs]
        b0 = min(r.b0 for r in reps)
        b1 = max(r.b1 for r in reps)
        theta = min(r.theta for r in reps)
    else:
        source = "bounded"
        n = _bounded_levels(ctx)[0]
        w = kz.decompose_bounded(ctx.fmap, ctx.critical, n, 0, rot)
        r = kz.verify_standing_hypothesis(kz.bounded_to_decomposition(ctx.fmap, w, rot))
        b0, b1, theta = r.b0, r.b1, r.theta
    res = kz.audit_inequality(kz.CriterionAudit(b0, b1, theta, ctx.delta, eta=0.0))
    etas = np.linspace(0.0, 1.0, 201)
    lhs = [kz.audit_lhs(b0, b1, ctx.delta, e) for e in etas]
    crossings = sum(1 for a, b in zip(lhs, lhs[1:]) if (a - 1.0) * (b - 1.0) < 0 or b == 1.0)
    ok = res.eta_star > 0 and crossings == 1
    return CheckResult("audit", PASS if ok else FAIL,
                       {"source": source, "b0": b0, "b1": b1, "theta": theta, "delta": ctx.delta,
                        "eta_star": res.eta_star, "epsilon_star": res.epsilon_star,
                        "crossings": crossings}, {},
                       {"columns": ["eta", "lhs"], "rows": [[float(e), l] for e, l in zip(etas, lhs)]})


def check_measure(ctx: RunContext) -> CheckResult:
    rot = ctx.rotation()
    series = ms.singularity_diagnostic(ctx.fmap, ctx.level_range, rot)
    rows = [[n, s] for n, s in zip(series.levels, series.spread)]
    sp = series.spread
    if ctx.fmap.is_rotation:
        ok = all(abs(s - 1.0) < 1e-6 for s in sp)
        verdict = "rotation: spread identically 1"
    elif ctx.fmap.critical_points:
        ok = series.increasing and sp[-1] > 10.0
        verdict = "critical map: spread growing (heuristic singularity verdict)"
    else:
        ok = max(sp) <= 2.0 * min(sp)
        verdict = "diffeomorphism: spread bounded"
    status = PASS if ok else FAIL
    if ok and any(series.degraded):
        status = DEGRADED
    return CheckResult("measure", status, {"final_spread": sp[-1], "verdict": verdict}, {},
                       {"columns": ["level", "spread"], "rows": rows})


RUNNERS = {
    "partition": check_partition,
    "realbounds": check_realbounds,
    "crossratio": check_crossratio,
    "koebe": check_koebe,
    "c1bounds": check_c1bounds,
    "schwarzian": check_schwarzian,
    "yoccoz": check_yoccoz,
    "katznelson-unbounded": check_katznelson_unbounded,
    "katznelson-bounded": check_katznelson_bounded,
    "audit": check_audit,
    "measure": check_measure,
}


def run_check(name: str, ctx: RunContext) -> CheckResult:
    """Run one check, turning any library error into a failed record."""
    t0 = time.perf_counter()
    try:
        res = RUNNERS[name](ctx)
    except MulticritError as e:
        res = CheckResult(name, FAIL, notes=[f"{type(e).__name__}: {e}"])
    except Exception as e:  # surfaced as a failed record, never a crash
        res = CheckResult(name, FAIL, notes=[f"{type(e).__name__}: {e}",
                                             traceback.format_exc(limit=3)])
    res.runtime = time.perf_counter() - t0
    return res


def result_to_record(res: CheckResult) -> dict:
    return {
        "name": res.name,
        "anchor": ANCHORS[res.name],
        "status": res.status,
        "constants": _clean(res.constants),
        "witnesses": _clean(res.witnesses),
        "series": _clean(res.series) if res.series else None,
        "notes": list(res.notes),
    }
