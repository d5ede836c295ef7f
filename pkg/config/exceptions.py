"""
Laboratory exceptions.

Every failure the numerical pipeline can signal is a ``LabError`` subclass
with a stable ``default_code``. The codes are what lands in the ``status``
column of flagged replication rows and in CLI error output, so they must
never change once released.
"""


class LabError(Exception):
    """
    Base class for all laboratory errors.

    Modelled on DRF's ``APIException``: subclasses set ``default_detail`` and
    ``default_code``; both can be overridden per instance.
    """

    default_detail = "Laboratory error."
    default_code = "error"

    def __init__(self, detail=None, code=None):
        self.detail = detail if detail is not None else self.default_detail
        self.code = code if code is not None else self.default_code
        super().__init__(self.detail)

    def __str__(self):
        return f"{self.code}: {self.detail}"


# ============================================================================
# Numerical errors
# ============================================================================

class QuadratureFailure(LabError):
    default_detail = "Quadrature error bound exceeds tolerance."
    default_code = "quadrature_failure"


class NoConvergence(LabError):
    default_detail = "Newton iteration did not converge."
    default_code = "no_convergence"


class MultipleMinima(LabError):
    default_detail = "Multi-start minimisation found more than one minimiser."
    default_code = "multiple_minima"


class SingularScenario(LabError):
    default_detail = "J(w0) is not positive definite; scenario is singular."
    default_code = "singular_detected"


class SingularInformation(LabError):
    default_detail = "J(w0) could not be inverted."
    default_code = "singular_J"


class SingularEmpiricalHessian(LabError):
    default_detail = "J_n(w_mle) could not be inverted."
    default_code = "singular_Jn"


class BackendUnconverged(LabError):
    default_detail = "Metropolis chains disagree (R-hat above threshold)."
    default_code = "backend_unconverged"


class InvalidInput(LabError):
    default_detail = "Invalid input."
    default_code = "invalid_input"


# ============================================================================
# Harness errors
# ============================================================================

class InsufficientPrecision(LabError):
    default_detail = "Monte Carlo standard error too large for this check."
    default_code = "insufficient_precision"


class InsufficientPoints(LabError):
    default_detail = "At least three sample sizes are needed for a scaling fit."
    default_code = "insufficient_points"


class ReplicationAborted(LabError):
    default_detail = "Too many replications failed; study aborted."
    default_code = "replication_aborted"


# ============================================================================
# I/O errors
# ============================================================================

class ConfigParseError(LabError):
    default_detail = "Configuration file could not be parsed."
    default_code = "parse_error"

    def __init__(self, detail=None, line=None):
        self.line = line
        if line is not None and detail is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)


class ConfigValidationError(LabError):
    default_detail = "Configuration is invalid."
    default_code = "validation_error"


class ResultIOError(LabError):
    default_detail = "Could not write results."
    default_code = "io_error"


class UnknownScenario(LabError):
    default_detail = "No scenario with this id."
    default_code = "unknown_scenario"
