"""Exception types shared across the pipeline."""


class ApkLeakError(Exception):
    """Base class for all errors raised by this package."""


class NotAnApp(ApkLeakError):
    """Input path is neither a zip archive nor a directory tree."""


class CorruptArchive(ApkLeakError):
    """Zip central directory could not be read."""


class BadMagic(ApkLeakError):
    """Buffer does not start with a supported dex magic."""


class TruncatedPool(ApkLeakError):
    """A string pool offset or entry runs past the end of the buffer."""


class EmptyString(ApkLeakError):
    """Scoring functions require a non-empty string."""


class SampleTooLarge(ApkLeakError):
    """Requested sample size exceeds the candidate population."""


class BadConfidence(ApkLeakError):
    """Confidence level must lie strictly between 0 and 1."""


class RedactionTooWide(ApkLeakError):
    """keep_prefix + keep_suffix must be smaller than the value length."""


class CrossAppPairing(ApkLeakError):
    """Credential factors from different apps may not be paired."""


class NoEndpointTemplate(ApkLeakError):
    """No validation endpoint is configured for the service."""


class TransportError(ApkLeakError):
    """Network-level failure while sending a validation request."""


class MutatingEndpoint(ApkLeakError):
    """Endpoint templates must be read-only or dry-run; mutating ones are rejected."""


class MissingTagOrder(ApkLeakError):
    """Life-span analysis needs an ordered dataset tag sequence covering all tags."""


class InputError(ApkLeakError):
    """CLI input artifact is missing or unusable (exit code 2)."""
