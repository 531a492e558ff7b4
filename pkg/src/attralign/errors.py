"""Exception types shared across the library."""


class AttrAlignError(Exception):
    """Base class for every error raised by this package."""


class ParseError(AttrAlignError):
    """A triple or alignment file line could not be parsed."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}, line {line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class FormatError(AttrAlignError):
    """A structured file does not match its declared format."""


class ConfigError(AttrAlignError):
    """Invalid or inconsistent configuration."""


class GraphLookupError(AttrAlignError):
    """Reference to an entity, attribute, value or key that does not exist."""


class ShapeError(AttrAlignError):
    """Operands with incompatible shapes passed to a tensor operation."""


class DegenerateInputError(AttrAlignError):
    """Mathematically undefined input, e.g. cosine of a zero vector."""


class UsageError(AttrAlignError):
    """An operation was invoked outside its supported protocol."""


class TrainingError(AttrAlignError):
    """Optimization produced a non-finite quantity and was aborted."""
