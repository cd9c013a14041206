"""Exception hierarchy shared by every lfslab module."""


class LfslabError(Exception):
    """Base class for all lfslab failures."""


class ConfigurationError(LfslabError):
    """Bad construction parameters: jet order caps, unknown names, tolerances."""


class ParameterError(ConfigurationError):
    """A numerical parameter outside its admissible range (e.g. N in (0, n))."""


class DomainError(LfslabError):
    """An argument outside the domain of the requested quantity."""


class ScopeError(DomainError):
    """The request needs global information this tool does not compute."""


class NotTemporalError(DomainError):
    """-df is not in the polar cone at the queried point."""


class ModelValidityError(LfslabError):
    """The fundamental tensor lost Lorentzian signature.

    Attributes
    ----------
    eigenvalues : ndarray
        Eigenvalues of g_v at the offending sample.
    """

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class NumericalError(LfslabError):
    """Base class for failures of a numerical procedure."""


class NumericalDegeneracyError(NumericalError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class IntegrationError(NumericalError):
    """The ODE integrator failed (step-size collapse or similar)."""


class NoConnectorError(NumericalError):
    """Newton shooting did not find a geodesic connector.

    This is not a proof that no connector exists.
    """


class ConvergenceError(NumericalError):
    """An inner solver did not converge; ``diagnostics`` holds its last state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
