"""Exception hierarchy shared across the package."""


class SwarmProtoError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SwarmProtoError):
    """A JSON document does not match the expected schema.

    ``path`` points at the offending field, e.g. ``transitions[2].label.logType``.
    """

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class PreconditionError(SwarmProtoError):
    """A documented operation precondition was violated by the caller."""


class ProjectionAmbiguity(SwarmProtoError):
    """Projection produced a state with two same-typed inputs leading to
    different targets.  Cannot happen for protocols passing determinacy
    checks; reported rather than silently resolved."""


class DefinitionError(SwarmProtoError):
    """A machine definition violates its structural invariants."""


class HandlerError(SwarmProtoError):
    """A user-supplied reaction or command handler raised.

    Fatal for the evaluation that triggered it; ``record_index`` is the
    position in the evaluated log, or ``None`` for command handlers.
    """

    def __init__(self, message: str, record_index: int | None = None) -> None:
        super().__init__(message)
        self.record_index = record_index


class CommandDisabledError(SwarmProtoError):
    """A command was invoked while not enabled in the current state."""


class ConflictError(SwarmProtoError):
    """Two received records share (nodeId, seq) but differ elsewhere —
    a corrupted or forged stream."""


class ScenarioError(SwarmProtoError):
    """A simulation scenario violates its invariants."""
