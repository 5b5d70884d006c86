"""Exception hierarchy shared across the package."""


class DynPopError(Exception):
    """Base class for all library errors."""


class SpecError(DynPopError):
    """A game definition is structurally invalid (dimensions, masks, masses,
    missing transition rows, unknown built-in names, ...)."""


class ExprError(SpecError):
    """Base class for expression-language problems."""


class ExprSyntaxError(ExprError):
    """Malformed expression text; carries the 1-based line/column."""

    def __init__(self, message, line, col):
        super().__init__(f"syntax error at {line}:{col}: {message}")
        self.line = line
        self.col = col


class UnknownIdentifierError(ExprError):
    """Identifier is neither a reference (d, pi, g) nor a known function."""


class ArityError(ExprError):
    """A reference or function was called with the wrong number of arguments."""


class ExprIndexError(ExprError, IndexError):
    """A reference indexes outside the game dimensions or a masked action."""


class EvalError(DynPopError):
    """An evaluator failed at runtime (division by zero, log of a non-positive
    value, non-finite output, or a transition row too far from stochastic).
    Carries the offending (tau, x, a) when known."""

    def __init__(self, message, tau=None, x=None, a=None):
        if tau is not None:
            where = f" at (tau={tau}, x={x}" + (f", a={a})" if a is not None else ")")
            message = message + where
        super().__init__(message)
        self.tau = tau
        self.x = x
        self.a = a


class ConfigError(DynPopError):
    """A run configuration parameter is outside its documented range."""


class IntegrationError(DynPopError):
    """The fixed-step integrator needed a projection correction larger than
    the allowed bound; the dynamics are too stiff for the chosen step."""


class CertificateError(DynPopError):
    """Policy iteration failed to terminate, which cannot happen on a
    well-formed finite MDP."""


class Theorem2Violation(DynPopError):
    """The dynamic-game equilibrium residuals and the reduced classical-game
    Nash residuals disagreed, which the reduction guarantees cannot happen."""

    def __init__(self, message, dynamic_residuals, classical_residual):
        super().__init__(message)
        self.dynamic_residuals = dynamic_residuals
        self.classical_residual = classical_residual
