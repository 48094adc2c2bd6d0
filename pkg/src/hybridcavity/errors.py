"""Exception and warning types shared across the package."""


class HybridCavityError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(HybridCavityError, ValueError):
    """A physical configuration failed validation.

    The individual violations are available as ``violations`` (a list of
    ``Violation`` records).
    """

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.field}: {v.rule}" for v in self.violations)
        super().__init__(msg or "invalid configuration")


class BranchOutOfRange(HybridCavityError, IndexError):
    pass


class PoleError(HybridCavityError, ZeroDivisionError):
    pass


class SingularDenominator(HybridCavityError, ZeroDivisionError):
    pass


class SingularSystem(HybridCavityError):
    pass


class ZeroTransmission(HybridCavityError):
    pass


class EigenFailure(HybridCavityError):
    pass


class InstabilityDetected(HybridCavityError):
    def __init__(self, time):
        self.time = time
        super().__init__(f"trajectory diverged at t = {time:.6g} s")


class WindowTooShort(HybridCavityError):
    pass


class GridPointError(HybridCavityError):
    """A point-level failure inside a grid evaluation, tagged with its index."""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"grid index {index}: {cause!r}")


class BistableWarning(UserWarning):
    pass


class QuadratureWarning(UserWarning):
    pass
