"""Exception hierarchy shared by every subpackage."""


class SpecNetError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class InputError(SpecNetError, ValueError):
    category = "input"


class IsolatedNodeError(InputError):
    category = "isolated-node"


class ParseError(SpecNetError, ValueError):
    """Malformed file. ``location`` is a line number (text) or byte offset (binary)."""

    category = "parse"

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class StateError(SpecNetError, RuntimeError):
    category = "state"


class DivergenceError(SpecNetError, FloatingPointError):
    """Non-finite iterate. Carries the iteration count and the last finite report."""

    category = "divergence"

    def __init__(self, message, iteration=None, report=None):
        super().__init__(message)
        self.iteration = iteration
        self.report = report


class DegenerateEmbeddingError(SpecNetError, ArithmeticError):
    category = "degenerate-embedding"


class RankError(DegenerateEmbeddingError):
    category = "rank"


class NotSPDError(DegenerateEmbeddingError):
    category = "not-spd"


class ConfigError(SpecNetError, ValueError):
    category = "config"
