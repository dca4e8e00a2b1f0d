"""Exception hierarchy shared by all lacelab modules."""

from __future__ import annotations


class LacelabError(Exception):
    """Base class for every error raised by lacelab."""


# graph construction -------------------------------------------------------

class GraphError(LacelabError, ValueError):
    """Invalid graph data passed to a constructor."""


class SelfLoop(GraphError):
    pass


class DanglingEdge(GraphError):
    pass


class DuplicateLabel(GraphError):
    pass


class TooLarge(GraphError):
    pass


class BadAnchors(GraphError):
    pass


# DGF parsing --------------------------------------------------------------

class DgfSyntaxError(LacelabError, ValueError):
    """Malformed DGF text; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DgfSemanticError(LacelabError, ValueError):
    """Well-formed DGF text describing an invalid graph."""

    def __init__(self, cause: GraphError, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{type(cause).__name__}: {cause}")
        self.cause = cause
        self.line = line


# algebra ------------------------------------------------------------------

class DegeneratePair(LacelabError, ValueError):
    pass


class LabelCollision(LacelabError, ValueError):
    pass


class ScriptError(LacelabError, ValueError):
    """Malformed ops-script."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# reduction ----------------------------------------------------------------

class UnknownEdge(LacelabError, KeyError):
    pass


class NotReducible(LacelabError, ValueError):
    pass


class HypothesisViolation(LacelabError, ValueError):
    pass


class Unsupported(LacelabError, ValueError):
    pass


class BadGadget(LacelabError, ValueError):
    pass


# numerics ---------------------------------------------------------------

class Infeasible(LacelabError, RuntimeError):
    """Estimated work or memory exceeds the configured budget."""


class LabelOutsideBox(LacelabError, ValueError):
    pass


class UnknownBound(LacelabError, KeyError):
    pass


# percolation --------------------------------------------------------------

class BadP(LacelabError, ValueError):
    pass


class OutOfBox(LacelabError, ValueError):
    pass


class DegenerateTargets(LacelabError, ValueError):
    pass


class InvariantBroken(LacelabError, AssertionError):
    """A reduction step broke a property it is supposed to preserve."""
