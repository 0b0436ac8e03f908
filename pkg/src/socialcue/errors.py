"""Exception hierarchy shared by the pipeline stages."""


class SocialCueError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SocialCueError):
    pass


class InsufficientTexture(SocialCueError):
    pass


class NoConsensus(SocialCueError):
    pass


class OutOfField(SocialCueError):
    pass


class DegenerateConfiguration(SocialCueError):
    pass


class NoConvergence(SocialCueError):
    pass


class DegenerateLandmarks(SocialCueError):
    pass


class StaleTimestamp(SocialCueError):
    pass


class FieldOverflow(SocialCueError):
    pass


class BadChecksum(SocialCueError):
    """Checksum mismatch; ``consumed`` bytes were skipped while resynchronising."""

    def __init__(self, message, consumed):
        super().__init__(message)
        self.consumed = consumed


class Truncated(SocialCueError):
    pass


class ParseError(SocialCueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(SocialCueError):
    pass
