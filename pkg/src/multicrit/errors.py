"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class MulticritError(Exception):
    """Base class for all package errors."""


# -- core -------------------------------------------------------------------


class DegenerateInterval(MulticritError, ValueError):
    pass


class NotCompactlyContained(MulticritError, ValueError):
    pass


# -- maps -------------------------------------------------------------------


class NotRegularPoint(MulticritError, ValueError):
    def __init__(self, x, step=None):
        self.x = x
        self.step = step
        where = "" if step is None else f" (orbit step {step})"
        super().__init__(f"{x!r} is not a regular point{where}")


class NotHomeomorphism(MulticritError):
    pass


class FlatOrEvenCriticality(MulticritError):
    pass


# -- rotation ---------------------------------------------------------------


class PrecisionExhausted(MulticritError):
    def __init__(self, max_depth: int):
        self.max_depth = max_depth
        super().__init__(f"continued fraction trustworthy only to depth {max_depth}")


class OverflowAtDepth(MulticritError):
    def __init__(self, depth: int):
        self.depth = depth
        super().__init__(f"return time overflows int64 at depth {depth}")


class InvalidTarget(MulticritError, ValueError):
    pass


class TargetUnreachable(MulticritError):
    pass


class BudgetExceeded(MulticritError):
    def __init__(self, best_omega: float, achieved_tol: float):
        self.best_omega = best_omega
        self.achieved_tol = achieved_tol
        super().__init__(
            f"bisection budget exhausted: omega={best_omega!r}, tol reached {achieved_tol:.3g}"
        )


# -- partition --------------------------------------------------------------


class PartitionInconsistent(MulticritError):
    pass


class RefinementBroken(MulticritError):
    pass


class BridgeNotFound(MulticritError):
    pass


class TooShortForFit(MulticritError):
    pass


class NotAlmostParabolic(MulticritError):
    pass


# -- distortion -------------------------------------------------------------


class IterateNotInjectiveOnT(MulticritError):
    pass


class MultiplicityExceeded(MulticritError):
    def __init__(self, measured: int, declared: int):
        self.measured = measured
        self.declared = declared
        super().__init__(f"intersection multiplicity {measured} exceeds declared {declared}")


class NotDiffeomorphicOnT(MulticritError):
    pass


class ChainRuleMismatch(MulticritError):
    pass


# -- schwarzian -------------------------------------------------------------


class AllSamplesExcluded(MulticritError):
    pass


class CoverageGap(MulticritError):
    pass


# -- katznelson -------------------------------------------------------------


class CombinatoricsTooBounded(MulticritError):
    pass


class DecompositionFailed(MulticritError):
    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        super().__init__(f"standing hypothesis condition ({condition}) failed {detail}".strip())


class PigeonholeFailed(MulticritError):
    pass


class DeltaTooLarge(MulticritError, ValueError):
    pass


# -- measure / cli ----------------------------------------------------------


class DepthExceeded(MulticritError):
    pass


class UnknownCheck(MulticritError, KeyError):
    pass


class ConfigError(MulticritError, ValueError):
    pass
