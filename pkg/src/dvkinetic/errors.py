class DVKError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "error"


class ConfigurationError(DVKError, ValueError):
    code = "configuration"


class DomainError(DVKError, ValueError):
    code = "domain"


class UnclassifiableError(DVKError, ValueError):
    code = "unclassifiable"


class UnboundedError(DVKError, ValueError):
    code = "unbounded"


class AdmissibilityError(DVKError, ValueError):
    code = "admissibility"


class NoCertificateError(DVKError, ValueError):
    code = "no-certificate"


class CompatibilityError(DVKError, ValueError):
    code = "compatibility"


class SimulationError(DVKError, RuntimeError):
    code = "simulation"

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
