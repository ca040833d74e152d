class GenRLError(Exception):
    """An error raised by genrl."""


class InvalidInputError(GenRLError):
    """A value does not satisfy the documented preconditions (shape, range, finiteness)."""


class ConfigError(GenRLError):
    """The configuration file is missing, unreadable, or has invalid values."""


class SpecSyntaxError(GenRLError):
    """
    The specification text could not be parsed.

    :param message: Human readable description of the problem.
    :param line: 1-based line of the offending token.
    :param column: 1-based column of the offending token.
    """

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.line: int = line
        self.column: int = column


class InstanceRangeError(GenRLError):
    """A task instance index lies outside the inductive task's range."""


class NumericOverflowError(GenRLError):
    """Unrolling a kappa-polynomial produced a non-finite parameter."""

    def __init__(self, message: str, instance_index: int) -> None:
        super().__init__(message)
        self.instance_index: int = instance_index


class EmptyDistributionError(GenRLError):
    """No rollout entered the vertex region, so no distribution can be induced."""

    def __init__(self, message: str, edge: tuple[int, int], instance_index: int) -> None:
        super().__init__(message)
        self.edge: tuple[int, int] = edge
        self.instance_index: int = instance_index


class UnguardableVertexError(GenRLError):
    """A branching vertex has no task instance routed through any of its out-edges."""

    def __init__(self, message: str, vertex: int) -> None:
        super().__init__(message)
        self.vertex: int = vertex


class ConsistencyError(GenRLError):
    """A learned artefact contradicts the graph it was learned for."""


class GeneratorFormatError(GenRLError):
    """A serialised policy generator could not be read."""
