"""Exception hierarchy shared by every graphflow module."""

from __future__ import annotations


class GraphflowError(Exception):
    """Base class; ``kind`` is the machine-parsable class name used by the CLI."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class PoleSingularity(GraphflowError, ValueError):
    """A latitude coordinate reached the excluded pole set of a sphere chart."""


class DegenerateMetric(GraphflowError, ArithmeticError):
    """An induced or ambient metric lost positive definiteness."""


class ArityError(GraphflowError, ValueError):
    """An operation was called on too few dimensions."""


class ConstraintError(GraphflowError, ValueError):
    """An algebraic sample cannot realize the premise of the identity it feeds."""


class Instability(GraphflowError, ArithmeticError):
    """Time stepping produced non-finite values."""

    def __init__(self, message: str, step: int | None = None, node: tuple | None = None):
        super().__init__(message)
        self.step = step
        self.node = node


class GraphLost(GraphflowError, ArithmeticError):
    """The evolving submanifold stopped being a (controlled) graph."""

    def __init__(self, message: str, step: int | None = None, node: tuple | None = None):
        super().__init__(message)
        self.step = step
        self.node = node


class ConfigError(GraphflowError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
