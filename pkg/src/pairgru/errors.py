"""Exception types shared across the toolkit.

Plain invalid arguments raise ValueError directly; the classes here cover
failures that callers (notably the CLI) need to tell apart.
"""


class FormatError(ValueError):
    """A file or record does not match its declared format."""


class ConfigError(ValueError):
    """A configuration key or value is unusable (unknown key, dim mismatch...)."""


class NumericError(ArithmeticError):
    """A NaN or Inf appeared where finite values are required; the run aborts."""


class DegenerateVectorError(ValueError):
    """An operation needing a nonzero vector got a (near-)zero one."""


class OutOfVocabularyError(LookupError):
    """A phrase contains words absent from the embedding table."""

    def __init__(self, words):
        self.words = list(words)
        super().__init__("out-of-vocabulary words: " + ", ".join(self.words))


class EvaluationError(RuntimeError):
    """An evaluation could not produce a score (e.g. every example skipped)."""
