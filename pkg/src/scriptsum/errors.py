"""Exception types shared across the toolkit."""


class MiniLangSyntaxError(SyntaxError):
    """Source text violates the MiniLang grammar. Carries line/column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class FormatError(ValueError):
    """An interchange or dataset file does not match its schema."""


class TreeError(ValueError):
    """Node list does not form a tree (cycle, multiple parents, orphan)."""


class ConfigError(ValueError):
    """Invalid configuration value (clip threshold, weights, layer plan...)."""


class ShapeError(ValueError):
    """Tensor operands have incompatible shapes."""


class NumericsError(ArithmeticError):
    """Numerical failure: fully masked softmax row, NaN/Inf loss."""


class StateError(RuntimeError):
    """Operation invoked in an invalid state (e.g. double backward)."""


class EmptyCorpusError(ValueError):
    """Vocabulary construction was given an empty split."""


class BucketError(ValueError):
    """Malformed bucket specification for corpus reports."""


class ArtifactMismatchError(RuntimeError):
    """Checkpoint, config and vocabulary artifacts do not belong together."""
