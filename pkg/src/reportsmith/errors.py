"""Exception types shared across the toolkit."""

from __future__ import annotations


class ReportsmithError(Exception):
    """Base class for all toolkit errors."""


class MalformedDocument(ReportsmithError):
    """Input is not a valid structured-report document (bad JSON or wrong types)."""


class MalformedGeneration(ReportsmithError):
    """A model generation contains no parsable report object."""


class ProviderUnavailable(ReportsmithError):
    """A backend (chat or embedding) could not be reached after retries."""


class AuthFailed(ReportsmithError):
    """The backend rejected our credentials."""


class TimedOut(ReportsmithError):
    """The backend did not answer within the configured timeout."""


class RetentionFailed(ReportsmithError):
    """No synthesis attempt cleared the similarity thresholds."""

    def __init__(self, message: str, attempts: list[dict] | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class PartialFetch(ReportsmithError):
    """A paged fetch failed mid-run; carries the fetched prefix and a resume cursor."""

    def __init__(self, message: str, bugs: list, cursor: dict):
        super().__init__(message)
        self.bugs = bugs
        self.cursor = cursor


class NothingToMask(ReportsmithError):
    """No sentence in the unstructured text aligns with the gold section."""


class IoFailure(ReportsmithError):
    """Filesystem write failed."""
