"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid configuration value or file."""


class NoInk(ToolkitError):
    """Image contains no ink pixels."""


class UnderSegmented(ToolkitError):
    """Fewer word groups were found than the transcript requires."""

    def __init__(self, found: int, needed: int):
        super().__init__(f"found {found} word groups, need {needed}")
        self.found = found
        self.needed = needed


class EmptyCorpus(ToolkitError):
    """An evaluation corpus contained no lines."""


class EmptyLabel(ToolkitError):
    """Label is empty after normalization (pure punctuation token)."""

    def __init__(self, raw: str):
        super().__init__(f"label {raw!r} is empty after stripping")
        self.raw = raw


class OcrError(ToolkitError):
    """Base class for transcription backend failures."""


class MissingTranscription(OcrError):
    """No transcription available for a crop (file backend miss)."""


class BackendUnavailable(OcrError):
    """HTTP backend failed after retries."""


class ProtocolError(OcrError):
    """HTTP backend returned a malformed response."""


class UndecodableImage(OcrError):
    """The service rejected the uploaded image bytes (HTTP 422)."""


class InvalidSample(ToolkitError):
    """A CER sample has an empty reference."""


class NotSymmetric(ToolkitError):
    """Matrix is asymmetric beyond tolerance."""


class DimensionMismatch(ToolkitError):
    """Embedding sets have different dimensions."""


class EmptyBank(ToolkitError):
    """No punctuation bank candidates were available."""


class EmptyPlan(ToolkitError):
    """A sentence plan is empty or structurally invalid."""
