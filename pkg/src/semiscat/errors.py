"""Exception hierarchy shared by the solver modules and the CLI exit-code map."""


class SemiscatError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(SemiscatError, ValueError):
    """Argument outside the domain of a special function or operator."""


class SingularityError(DomainError):
    """Kernel evaluated on its diagonal."""


class GridError(SemiscatError, ValueError):
    """Grid or direction-set construction failed."""


class AnalyticityError(SemiscatError):
    """A field left the disk |z| < eta where the Taylor series is valid."""

    exit_code = 3


class GateError(SemiscatError):
    """Incident density violates the small-data gate ||g||_sup < delta**2."""

    exit_code = 2


class DivergenceError(SemiscatError):
    """Fixed-point iteration failed to contract."""

    exit_code = 3


class ResonanceError(SemiscatError):
    """Dense linear system is numerically singular (k near a discrete resonance)."""

    exit_code = 3


class IllPosedError(SemiscatError):
    """Reconstruction system cannot be stabilised, or its inputs are incomplete."""

    exit_code = 4


class MissingRecordsError(IllPosedError):
    """Dataset lacks records needed by a finite-difference stencil."""

    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(str(m) for m in self.missing[:20])
        more = "" if len(self.missing) <= 20 else f" (+{len(self.missing) - 20} more)"
        super().__init__(f"missing epsilon records: {shown}{more}")


class ConfigError(SemiscatError, ValueError):
    """Invalid run configuration."""
