"""Exception hierarchy for the Lie pair engine.

Every error subclasses ValueError so callers that only care about bad input can
catch the builtin, the way the rest of the package raises ValueError for
malformed data.
"""


class LiePairError(ValueError):
    """Base class for all engine errors"""


class PolyParseError(LiePairError):
    """A polynomial string could not be parsed"""

    def __init__(self, text, reason, token=None):
        self.text = text
        self.token = token
        where = f" (token '{token}')" if token is not None else ""
        super().__init__(f"Cannot parse polynomial '{text}': {reason}{where}")


class ModelFileError(LiePairError):
    """A model file is unreadable or structurally malformed"""

    def __init__(self, message, location=None):
        self.location = location
        prefix = f"{location}: " if location else ""
        super().__init__(f"{prefix}{message}")


class ShapeMismatchError(LiePairError):
    """Declared (n, r, r') disagree with table dimensions"""


class ModelValidationError(LiePairError):
    """A model violates one of the Lie pair axioms"""

    def __init__(self, violations):
        self.violations = violations
        first = violations[0]['message'] if violations else "unknown violation"
        super().__init__(f"Model is not a Lie pair ({len(violations)} violations): {first}")


class SubalgebraClosureError(LiePairError):
    """The first r frame vectors do not span a subalgebra"""


class ActionMorphismError(LiePairError):
    """Action vector fields do not satisfy the Lie algebra morphism condition"""


class FrameInversionError(LiePairError):
    """A foliation frame has no polynomial inverse"""


class ConnectionTableError(LiePairError):
    """A Christoffel table violates the admissibility constraints"""

    def __init__(self, violations):
        self.violations = violations
        first = violations[0]['message'] if violations else "unknown violation"
        super().__init__(f"Connection table is not admissible: {first}")


class UnknownModuleTagError(LiePairError):
    """An induced module tag is not recognised"""


class NotAPerturbation(LiePairError):
    """(delta + perturbation) does not square to zero"""

    def __init__(self, generator, residual):
        self.generator = generator
        self.residual = residual
        super().__init__(f"(delta + perturbation)^2 != 0 on generator {generator!r}")


class NonNilpotent(LiePairError):
    """A perturbation series did not terminate within max_iter steps"""

    def __init__(self, series, generator, max_iter):
        self.series = series
        self.generator = generator
        self.max_iter = max_iter
        super().__init__(
            f"Series for {series} still nonzero on {generator!r} after {max_iter} iterations"
        )


class ClosedFormMismatch(LiePairError):
    """A perturbed operator differs from its expected closed form"""

    def __init__(self, operator, generator, expected, got):
        self.operator = operator
        self.generator = generator
        self.expected = expected
        self.got = got
        super().__init__(
            f"{operator} mismatch on {generator!r}: expected {expected}, got {got}"
        )


class ConstraintViolation(LiePairError):
    """A pair-form section violates the anchor compatibility constraint"""


class NotClosed(LiePairError):
    """Exactness was requested for a form that is not closed"""

    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"Form is not closed: D(z) = {residual}")


class NotPointCase(LiePairError):
    """A finite-dimensional computation was requested with n > 0"""

    def __init__(self, n):
        self.n = n
        super().__init__(
            f"Chart dimension n = {n} > 0: cohomology is infinite-dimensional, point case only"
        )


class DegreeRangeError(LiePairError):
    """A wedge degree lies outside the supported range"""


class MissingSmallSpace(LiePairError):
    """A contraction needs explicit small-space data for this operation"""
