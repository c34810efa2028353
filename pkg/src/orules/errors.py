"""Exception hierarchy for the simulator."""


class OrulesError(Exception):
    """Base class for every error raised by this package."""


class DuplicateAgent(OrulesError):
    pass


class BadWeight(OrulesError):
    pass


class GatedComponent(OrulesError):
    """A ready-entangled component was asked to transmit current."""


class StepTooCoarse(OrulesError):
    """The per-step hit probability exceeds the first-order bound."""


class UnknownEvent(OrulesError):
    pass


class NotReady(OrulesError):
    pass


class NonTermination(OrulesError):
    """The trajectory clock ran past its termination bound."""


class EmptySample(OrulesError):
    pass


class ScenarioError(OrulesError):
    """A scenario text failed to parse or validate.

    Every instance carries the 1-based ``line`` and ``column`` of the
    offending token so that diagnostics can point at the source.
    """

    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class ScenarioSyntaxError(ScenarioError):
    pass


class UnknownKey(ScenarioError):
    pass


class MissingRequired(ScenarioError):
    pass


class OrderViolation(ScenarioError):
    pass


class InvalidValue(ScenarioError):
    pass
