"""Exception hierarchy shared by every module."""


class QuenchedSFTError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(QuenchedSFTError, ValueError):
    """An object or configuration violates one of its invariants."""


class WordCapExceeded(QuenchedSFTError):
    """An enumeration would exceed the configured word cap."""

    def __init__(self, count, cap):
        super().__init__(f"enumeration needs {count} words, cap is {cap}")
        self.count = count
        self.cap = cap


class NonConvergenceError(QuenchedSFTError):
    """The burn-in doubling failed to reach the requested tolerance."""

    def __init__(self, gap, m, tol):
        super().__init__(
            f"no convergence at burn-in m={m}: Cauchy gap {gap:.3e} > tol {tol:.1e}"
        )
        self.gap = gap
        self.m = m
        self.tol = tol


class HorizonError(QuenchedSFTError):
    """A time change is too short to cover the requested window."""
