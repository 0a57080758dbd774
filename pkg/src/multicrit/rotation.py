"""Continued fractions, return times, rotation numbers and parameter tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np

from .errors import (
    BudgetExceeded,
    InvalidTarget,
    OverflowAtDepth,
    PrecisionExhausted,
    TargetUnreachable,
)
from .maps import MapSpec, lift_iterate, orbit, validate_homeomorphism

INT64_MAX = 2**63 - 1
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class RotationTarget:
    """An irrational in (0,1) given by partial quotients: a finite prefix then
    a periodic tail repeated forever."""

    prefix: tuple[int, ...] = ()
    periodic_tail: tuple[int, ...] = (1,)

    def __post_init__(self):
        prefix = tuple(int(a) for a in self.prefix)
        tail = tuple(int(a) for a in self.periodic_tail)
        if not tail:
            raise InvalidTarget("periodic tail must be nonempty (finite expansions are rational)")
        if any(a < 1 for a in prefix + tail):
            raise InvalidTarget("partial quotients must be positive integers")
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "periodic_tail", tail)

    @classmethod
    def golden(cls) -> "RotationTarget":
        return cls((), (1,))

    @classmethod
    def from_dict(cls, data: dict) -> "RotationTarget":
        return cls(tuple(data.get("prefix", ())), tuple(data.get("periodic_tail", ())))

    def to_dict(self) -> dict:
        return {"prefix": list(self.prefix), "periodic_tail": list(self.periodic_tail)}

    def quotient(self, n: int) -> int:
        if n < len(self.prefix):
            return self.prefix[n]
        return self.periodic_tail[(n - len(self.prefix)) % len(self.periodic_tail)]

    def quotients(self, depth: int) -> list[int]:
        return [self.quotient(n) for n in range(depth)]

    def tail_fraction(self, start: int = 0, extra: int = 80) -> Fraction:
        """[0; a_start, a_start+1, ...] truncated ``extra`` quotients deep."""
        x = Fraction(0)
        for a in reversed([self.quotient(n) for n in range(start, start + extra)]):
            x = 1 / (a + x)
        return x

    @property
    def value(self) -> float:
        return float(self.tail_fraction())

    @property
    def bounded_type(self) -> bool:
        return True  # eventually periodic expansions always have bounded quotients

    @property
    def max_quotient(self) -> int:
        return max(self.prefix + self.periodic_tail)


@dataclass
class RotationData:
    rho: float
    partial_quotients: list[int]
    convergents: list[tuple[int, int]]
    target: RotationTarget | None = field(default=None, repr=False)

    @classmethod
    def from_target(cls, target: RotationTarget, depth: int = 40) -> "RotationData":
        a = target.quotients(depth)
        return cls(target.value, a, convergents(a, strict=False), target)

    @classmethod
    def from_float(cls, rho: float, depth: int) -> "RotationData":
        a = continued_fraction(rho, depth)
        return cls(rho, a, convergents(a))

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    @property
    def p(self) -> list[int]:
        return [pq[0] for pq in self.convergents]

    @property
    def q(self) -> list[int]:
        return [pq[1] for pq in self.convergents]

    def a(self, n: int) -> int:
        return self.partial_quotients[n]

    def ensure_depth(self, n: int) -> None:
        """Make convergents available up to index ``n`` (extending from the target)."""
        if n < len(self.convergents):
            return
        if self.target is None:
            from .errors import DepthExceeded

            raise DepthExceeded(f"rotation data only reaches q_{len(self.convergents) - 1}")
        extra = max(n + 4, 2 * self.depth)
        fresh = RotationData.from_target(self.target, extra)
        self.partial_quotients = fresh.partial_quotients
        self.convergents = fresh.convergents

    def closeness(self, n: int) -> float:
        """|q_n rho - p_n|, evaluated exactly from the continued fraction.

        This is the product of the Gauss-map iterates x_0 ... x_n, which avoids
        the cancellation of computing q_n*rho - p_n in floating point.
        """
        if self.target is not None:
            prod = Fraction(1)
            for k in range(n + 1):
                prod *= self.target.tail_fraction(k)
            return float(prod)
        p, q = self.convergents[n]
        return abs(q * Fraction(self.rho) - p).__float__()


def continued_fraction(rho: float, depth: int) -> list[int]:
    """Partial quotients a_0..a_{depth-1} of rho via the Gauss map.

    The rounding error of the current iterate is tracked; once it could move
    1/x across an integer the expansion is no longer trustworthy and
    PrecisionExhausted reports how many quotients were reliable.
    """
    if not 0.0 < rho < 1.0:
        raise InvalidTarget(f"rho must lie in (0,1), got {rho!r}")
    x = float(rho)
    err = math.ulp(x) / 2
    out: list[int] = []
    for n in range(depth):
        if x == 0.0:
            raise PrecisionExhausted(n)
        y = 1.0 / x
        ey = err / (x * x) + math.ulp(y)
        a = math.floor(y)
        if math.floor(y - ey) != a or math.floor(y + ey) != a or a < 1:
            raise PrecisionExhausted(n)
        out.append(a)
        x = y - a
        err = ey + math.ulp(x)
    return out


def convergents(a, strict: bool = True) -> list[tuple[int, int]]:
    """Pairs (p_n, q_n) for n = 0..len(a) with q_0 = 1, q_1 = a_0.

    With ``strict`` the denominators must fit a signed 64-bit integer.
    """
    a = list(a)
    if not a:
        raise ValueError("need at least one partial quotient")
    p = [0, 1]
    q = [1, a[0]]
    for n in range(1, len(a)):
        p.append(a[n] * p[-1] + p[-2])
        q.append(a[n] * q[-1] + q[-2])
        if strict and q[-1] > INT64_MAX:
            raise OverflowAtDepth(n + 1)
    if strict and q[1] > INT64_MAX:
        raise OverflowAtDepth(1)
    return list(zip(p, q))


def estimate_rotation_number(fmap: MapSpec, iterations: int) -> tuple[float, float]:
    """(F^n(0)/n, 2/n) for the lift F."""
    y = lift_iterate(fmap, 0.0, iterations)
    return y / iterations, 2.0 / iterations


def _required_depth(q: list[int], tol: float) -> int:
    for n in range(len(q) - 1):
        if 1.0 / (q[n] * q[n + 1]) < tol:
            return n
    raise InvalidTarget("rotation data too shallow for the requested tolerance")


def combinatorial_mismatch(fmap: MapSpec, rot: RotationData, depth: int, x: float = 0.0):
    """First n <= depth at which the orbit of x disagrees with the target.

    Returns None when the lift satisfies F^{q_n}(x) - x - p_n > 0 for every
    even n and < 0 for every odd n up to ``depth``, which pins rho(f)
    between consecutive convergents.  Otherwise returns (n, too_small) where
    ``too_small`` means rho(f) lies below the target.
    """
    p, q = rot.p, rot.q
    y, wraps, t = x, 0, 0
    step = fmap.scalar_stepper()
    for n in range(depth + 1):
        while t < q[n]:
            y, k = step(y)
            wraps += k
            t += 1
        s = (wraps - p[n]) + (y - x)
        if n % 2 == 0:
            if s <= 0:
                return n, True
        elif s >= 0:
            return n, False
    return None


def tune_parameter(family: MapSpec, target, tol: float = 1e-10, base_point: float = 0.0,
                   max_steps: int = MAX_BISECTIONS) -> float:
    """Translation parameter omega whose rotation number is within tol of target.

    Bisection on omega using monotonicity of omega -> rho.  Each candidate is
    classified exactly by comparing F^{q_n}(x) with x + p_n along the orbit,
    rather than by a Birkhoff average whose 2/n error could not reach 1e-10.
    """
    if not isinstance(target, RotationTarget):
        if isinstance(target, (Real, Fraction)):
            raise InvalidTarget(
                f"target {target!r} must be given by its continued fraction, not a number"
            )
        raise InvalidTarget(f"unsupported target {target!r}")
    if tol < 1e-12:
        raise InvalidTarget("tolerance below 1e-12 is not supported")
    if family.is_rotation:
        return target.value

    rot = RotationData.from_target(target, 60)
    depth = _required_depth(rot.q, tol) + 1

    lo, hi = 0.0, 1.0
    lo_check = combinatorial_mismatch(family.with_omega(lo), rot, depth, base_point)
    hi_check = combinatorial_mismatch(family.with_omega(hi), rot, depth, base_point)
    if lo_check is None or hi_check is None or not lo_check[1] or hi_check[1]:
        raise TargetUnreachable("rotation number does not bracket the target on [0, 1]")

    best_n = -1
    mid = 0.5
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        res = combinatorial_mismatch(family.with_omega(mid), rot, depth, base_point)
        if res is None:
            return mid
        n, too_small = res
        best_n = max(best_n, n - 1)
        if too_small:
            lo = mid
        else:
            hi = mid
        if hi - lo <= math.ulp(mid):
            break
    achieved = 1.0 if best_n < 0 else 1.0 / (rot.q[best_n] * rot.q[best_n + 1])
    raise BudgetExceeded(mid, achieved)


def tune_map(family: MapSpec, target: RotationTarget, tol: float = 1e-10,
             depth: int = 60) -> tuple[MapSpec, RotationData]:
    """Tune, validate, and bundle the map with its rotation data."""
    omega = tune_parameter(family, target, tol)
    fmap = family.with_omega(omega)
    validate_homeomorphism(fmap)
    return fmap, RotationData.from_target(target, depth)


def certified_depth(fmap: MapSpec, rot: RotationData, x: float = 0.0, max_depth: int = 40) -> int:
    """Deepest n for which the combinatorial signs agree at every level <= n."""
    rot.ensure_depth(max_depth + 1)
    res = combinatorial_mismatch(fmap, rot, max_depth, x)
    return max_depth if res is None else res[0] - 1


def combinatorial_order_matches(fmap: MapSpec, rot: RotationData, n: int, x: float = 0.0) -> bool:
    """Does the cyclic order of the first q_n + q_{n+1} orbit points of x match
    the rigid rotation by rho?

    The reference order uses a deep convergent p/q with q > 4 K^2, for which
    i*p/q mod 1 orders i < K exactly as i*rho mod 1 does; the keys are then
    exact integers.
    """
    rot.ensure_depth(n + 2)
    count = rot.q[n] + rot.q[n + 1]
    depth = n + 1
    while rot.q[depth] <= 4 * count * count:
        depth += 1
        rot.ensure_depth(depth)
    p_deep, q_deep = rot.convergents[depth]
    keys = [(i * p_deep) % q_deep for i in range(count)]
    ref_order = sorted(range(count), key=keys.__getitem__)
    pts = orbit(fmap, x, count)
    offs = np.mod(pts - pts[0], 1.0)
    order = list(np.argsort(offs, kind="stable"))
    return order == ref_order


def check_monotone(family: MapSpec, omegas, iterations: int = 10_000) -> bool:
    """Spot check that the rotation number estimate is nondecreasing in omega.

    Consecutive estimates may dip by at most the sum of their error bounds.
    """
    est = [estimate_rotation_number(family.with_omega(w), iterations) for w in sorted(omegas)]
    return all(b[0] >= a[0] - (a[1] + b[1]) for a, b in zip(est, est[1:]))
