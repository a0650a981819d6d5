"""Exception hierarchy shared by all anchorkit modules.

Every error carries a ``category`` used by the service/CLI layer to map
failures onto exit codes: "config" -> 2, "numeric" -> 3, "invariant" -> 4.
"""


class AnchorKitError(Exception):
    category = "numeric"


class ConfigError(AnchorKitError):
    category = "config"


class DimensionMismatch(ConfigError):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.field = field


class NotSingleValuedHere(AnchorKitError):
    """Operator evaluation requested at a point where it is set-valued."""


class SingularSystem(AnchorKitError):
    """A resolvent linear system could not be factorized."""


class AdaptiveNeedsState(ConfigError):
    """Adaptive anchor coefficients depend on the trajectory state."""


class NonpositiveDenominator(AnchorKitError):
    """Adaptive weight denominator was nonpositive with a nonzero residual.

    Along valid adaptive runs the inner product <residual, x - x0> stays
    negative; a nonpositive denominator signals misuse or a falsified
    invariant, so it maps to exit code 4 rather than 3.
    """

    category = "invariant"


class NonFiniteState(AnchorKitError):
    """Integration blew up; carries the valid prefix of the trajectory."""

    def __init__(self, message, trajectory=None, time=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.time = time


class NoConvergence(AnchorKitError):
    """A series or iteration hit its term budget before converging."""


class QuadratureUnstable(AnchorKitError):
    """An integrand ratio that should stay <= 1 exceeded it."""


class DenominatorVanished(AnchorKitError):
    """The adaptive flow's coefficient denominator vanished at some time."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class UnsupportedScheduleForExactBound(ConfigError):
    pass


class DisconnectedGraph(ConfigError):
    pass


class StepSizeTooLarge(ConfigError):
    pass


def exit_code_for(exc):
    """Map an exception to the CLI exit-code convention."""
    if isinstance(exc, AnchorKitError):
        return {"config": 2, "numeric": 3, "invariant": 4}[exc.category]
    return 3
