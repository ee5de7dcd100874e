"""Exception and warning types shared across the package."""

from __future__ import annotations


class EffKernelError(Exception):
    """Base class for all package errors."""


class NetworkParseError(EffKernelError):
    """Config text could not be turned into a network description."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class SpecValidationError(EffKernelError):
    def __init__(self, report):
        self.report = report
        msgs = "; ".join(f"{loc}: {msg}" for loc, msg in report.errors)
        super().__init__(f"invalid network spec: {msgs}")


class UnknownPresetError(EffKernelError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown preset"


class EigenSolverError(EffKernelError):
    def __init__(self, s: float, cause: Exception):
        super().__init__(f"eigenvalue solver failed at s={s!r}: {cause}")
        self.s = s


class AmbiguousAsymptoteError(EffKernelError):
    """The leading eigenvalue curve does not settle into 0 or a*s**2 growth."""


class UnsupportedStructureError(EffKernelError):
    """Branch structure outside the single-collision construction."""


class ComplexBranchesError(UnsupportedStructureError):
    """Real-branch reduction requested but complex eigenvalues were found."""


class RegularizationError(EffKernelError):
    pass


class InstabilityError(EffKernelError):
    def __init__(self, step: int, max_abs: float):
        super().__init__(f"simulation unstable at step {step}: max|u| = {max_abs:.4g}")
        self.step = step
        self.max_abs = max_abs


class DetectionError(EffKernelError):
    pass


class DecayWarning(UserWarning):
    """A sampled spectrum has not decayed at the end of its grid."""

    def __init__(self, message: str, ratio: float):
        super().__init__(message)
        self.ratio = ratio
