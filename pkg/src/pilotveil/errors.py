"""Exception taxonomy.

Validation errors (bad inputs, bad config files) map to CLI exit code 2;
numerical errors (singular geometry, failed descent) map to exit code 3.
"""


class PilotveilError(Exception):
    """Base class for all library errors."""


class ValidationError(PilotveilError):
    """Invalid physical parameters or scenario description."""


class SchemaError(ValidationError):
    """Config file does not match the documented schema.

    Carries the offending field path, e.g. ``ofdm.num_subcarriers``.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DelayExceedsCp(ValidationError):
    """An injected differential delay is not realizable within the CP."""


class BadPerturbationNorm(ValidationError):
    """An explicit noise perturbation vector has the wrong norm."""


class ZeroDistance(ValidationError):
    """Path-loss gain requested at zero propagation distance."""


class CoincidentPoint(ValidationError):
    """A position coincides with an anchor, so delays are undefined."""


class NumericalError(PilotveilError):
    """Base class for failures of the numerical machinery."""


class DegenerateCurvature(NumericalError):
    """The generalized-information curvature vanished; MCRB undefined."""


class SingularA(NumericalError):
    """The A generalized FIM is not invertible."""


class SingularGeometry(NumericalError):
    """Anchor geometry is rank deficient (e.g. collinear with the target)."""


class NoDescentProgress(NumericalError):
    """Backtracking underflowed while meaningful decrease remained."""
