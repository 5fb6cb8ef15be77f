"""Shared exception roots. Module-specific errors subclass OntoragError so the
CLI can map any pipeline failure to a non-zero exit in one place."""


class OntoragError(Exception):
    """Base class for all errors raised by this package."""


class IoError(OntoragError):
    """A file could not be read or written."""

    def __init__(self, path: str, detail: str = ""):
        self.path = path
        self.detail = detail
        super().__init__(f"i/o error on {path}" + (f": {detail}" if detail else ""))
