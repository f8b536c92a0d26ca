"""Exception types raised by the library."""


class ReassemblyError(Exception):
    """Base class for errors raised by this package."""


class PlyError(ReassemblyError):
    """A point-cloud file could not be parsed or written.

    The message includes the offending line number (ASCII) or byte offset
    (binary) whenever one is known.
    """


class TransformIOError(ReassemblyError):
    """A transform JSON file is malformed or encodes an invalid transform."""


class PipelineError(ReassemblyError):
    """A pipeline stage failed; the message is prefixed with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
