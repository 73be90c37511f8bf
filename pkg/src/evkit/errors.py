"""Exception types shared across the toolkit."""


class EvkitError(Exception):
    """Base class for all evkit data errors."""


class ParseError(EvkitError):
    """Malformed input file or byte stream.

    ``line`` is 1-based for text inputs, ``offset`` is a byte position for
    binary inputs; either may be None.
    """

    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        loc = ""
        if line is not None:
            loc = f", line {line}"
        elif offset is not None:
            loc = f", byte offset {offset}"
        super().__init__(f"{message}{loc}")
        self.line = line
        self.offset = offset


class OrderError(EvkitError):
    """Input events are not sorted by timestamp and sorting was not requested."""


class DegenerateFrameError(EvkitError):
    """Displacement is undefined (e.g. constant frames carry no signal)."""
