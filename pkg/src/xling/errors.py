"""Exception hierarchy shared by all xling modules.

Every error carries a short machine-readable ``code`` so the CLI can emit
``ERROR <code>: <detail>`` lines without inspecting exception types.
"""


class XlingError(Exception):
    """Base class for all errors raised by this package."""

    code = "INTERNAL"


class OOVError(XlingError):
    """A surface form is absent from the pronunciation lexicon."""

    code = "OOV"

    def __init__(self, surface, language, offset=None):
        self.surface = surface
        self.language = language
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"no {language} lexicon entry for {surface!r}{where}")


class UnmappedLDPError(XlingError):
    """A (label, language) pair has no IPA decomposition."""

    code = "UNMAPPED_LDP"

    def __init__(self, label, language, offset=None):
        self.label = label
        self.language = language
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"no IPA mapping for {language} phoneme {label!r}{where}")


class LengthMismatchError(XlingError):
    """Row counts disagree with a length or duration sequence."""

    code = "LENGTH_MISMATCH"


class ConfigMismatchError(XlingError):
    """An input does not satisfy the configured expectations."""

    code = "CONFIG_MISMATCH"


class EmptyAudioError(XlingError):
    """An audio buffer holds no samples."""

    code = "EMPTY_AUDIO"


class BadConfigError(XlingError):
    """A configuration object violates its own invariants."""

    code = "BAD_CONFIG"


class ShapeMismatchError(XlingError):
    """Tensor shapes disagree where the dataflow requires agreement."""

    code = "SHAPE_MISMATCH"


class UnknownSpeakerError(XlingError):
    """A speaker id falls outside the configured speaker table."""

    code = "UNKNOWN_SPEAKER"


class ParseError(XlingError):
    """A structured text file is malformed."""

    code = "PARSE"

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}: "
        super().__init__(f"{prefix}{message}")


class DurationMismatchError(XlingError):
    """Alignment frame totals disagree with the audio duration."""

    code = "DURATION_MISMATCH"


class MissingSpeakerError(XlingError):
    """A dataset spec names a speaker absent from every scan root."""

    code = "MISSING_SPEAKER"


class EmptyManifestError(XlingError):
    """An operation that needs manifest entries received none."""

    code = "EMPTY_MANIFEST"
