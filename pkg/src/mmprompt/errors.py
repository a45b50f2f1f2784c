"""Exception types raised across the toolkit."""


class MMPromptError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MMPromptError, ValueError):
    """Invalid configuration: bad weights, missing modality, unknown names."""


class ParseError(MMPromptError, ValueError):
    """Malformed input text. ``lineno`` is 1-based, or None when not line-oriented."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ManifestError(ConfigError):
    pass


class NoVisibleStreamError(ManifestError):
    pass


class UnknownModalityError(ManifestError):
    pass


class EmptyPatternError(ManifestError):
    pass


class LengthMismatchError(ManifestError):
    pass


class FrameReadError(MMPromptError, OSError):
    """An image or data file could not be read or decoded."""


class ProtocolError(MMPromptError, ValueError):
    """An evaluation protocol cannot be applied to the given data."""
