"""Exception hierarchy for the pipeline."""

from __future__ import annotations


class KgclozeError(Exception):
    """Base class for all package errors."""


class ConfigError(KgclozeError):
    """Invalid configuration value or schema violation."""


class ParseError(KgclozeError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        prefix = f"{path}:{line}: " if path else f"line {line}: "
        super().__init__(prefix + message)


class NotFoundError(KgclozeError):
    """Lookup of an unknown relation or entity."""


class MissingArtifactError(KgclozeError):
    """An upstream pipeline stage has not produced its artifact yet."""

    def __init__(self, artifact: str, producing_stage: str):
        self.artifact = artifact
        self.producing_stage = producing_stage
        super().__init__(
            f"missing artifact {artifact!r}; run stage {producing_stage!r} first"
        )


class PromptSelectionError(KgclozeError):
    """Every candidate was filtered out; supply a manual seed prompt."""


class SamplingError(KgclozeError):
    """Negative sampling could not satisfy the requested count."""


class DivergenceError(KgclozeError):
    """Training loss increased for too many consecutive epochs."""


class ScoringError(KgclozeError):
    """The scorer rejected or failed a scoring request (remote 4xx/5xx)."""

    def __init__(self, message: str, status: int = 0):
        self.status = status
        super().__init__(message)


class RemoteRequestError(ScoringError):
    """The remote scorer rejected the request as malformed (4xx)."""


class RemoteServerError(ScoringError):
    """The remote scorer failed while scoring (5xx)."""


class TransportError(KgclozeError):
    """The remote scorer was unreachable; distinct from a scoring failure."""
