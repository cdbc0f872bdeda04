"""Exception types shared across the package.

Every failure mode that a caller is expected to branch on gets its own
class; generic misuse raises ValueError as usual.  The CLI maps these to
exit codes in one place (see cli.EXIT_*).
"""


class NkgError(Exception):
    """Base class for all package-specific errors."""


class ModelDomainError(NkgError, ValueError):
    """Nonlinearity evaluated at a negative amplitude."""


class ModelRangeError(NkgError, ValueError):
    """Nonlinearity evaluated beyond its declared amplitude range."""


class ConstructionError(NkgError):
    """A derived model (truncation continuation) could not be built."""


class DecompositionError(NkgError):
    """The negative set of R could not be resolved into intervals."""


class GridGeometryError(NkgError, ValueError):
    """A profile does not fit on the requested grid."""


class CollapseError(NkgError):
    """Charge-carrying descent reached K ~ 0, where E_sigma blows up."""


class GroundStateNotFound(NkgError):
    """No hylomorphic minimizer was found; carries the best local result."""

    def __init__(self, message, best_local=None, diagnostics=None):
        super().__init__(message)
        self.best_local = best_local
        self.diagnostics = diagnostics or {}


class BasinExitError(NkgError):
    """Descent restricted to the J0 < 0 basin kept hitting the boundary."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CflError(NkgError, ValueError):
    """Requested time step violates the stability guard."""


class EvolutionAborted(NkgError):
    """Field values became non-finite during time integration."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class ConfigError(NkgError, ValueError):
    """Malformed run configuration or model file."""
