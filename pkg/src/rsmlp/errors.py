"""Exception types shared across the package."""


class RsmlpError(Exception):
    """Base class for all library errors."""


class EmptyInput(RsmlpError):
    """Text was empty after trimming."""


class CorpusError(RsmlpError):
    """Corpus file unreadable or entirely malformed."""


class MissingGold(RsmlpError):
    """Operation needs a gold rewrite but the example has none."""


class MalformedProgram(RsmlpError):
    """Edit program references out-of-range tokens or columns."""


class ShapeError(RsmlpError):
    """Tensor dimensions do not compose."""


class DegenerateBatch(RsmlpError):
    """BatchNorm asked to normalize fewer than two cells, or every cell masked."""


class NoTrace(RsmlpError):
    """backward() called without a recorded forward trace."""


class SequenceTooLong(RsmlpError):
    """Joint sequence exceeds the configured maximum length."""


class IncompatibleCheckpoint(RsmlpError):
    """Checkpoint file does not match the expected format or config."""
