"""Exception types shared across the package.

Plain ``ValueError`` is used for invalid arguments; the classes here cover
the remaining failure categories that callers (and the CLI) need to tell
apart.
"""


class FormatError(ValueError):
    """A serialized artifact (dataset file, cache, checkpoint) is malformed.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ContractError(RuntimeError):
    """A component violated an internal interface contract."""


class NumericError(RuntimeError):
    """A computation produced non-finite or otherwise unusable numbers."""
