"""Error taxonomy shared by the library, the service, and the CLI exit codes."""


class OrbitgaugeError(Exception):
    """Base class for all orbitgauge errors."""

    exit_code = 1


class PreconditionError(OrbitgaugeError):
    """An operation was called outside its stated domain of validity."""

    exit_code = 2


class BudgetError(OrbitgaugeError):
    """The request is valid but exceeds the desk-scale compute budget."""

    exit_code = 3


class AuditError(OrbitgaugeError):
    """A soundness audit failed; indicates a bug, never a tolerable outcome."""

    exit_code = 4
