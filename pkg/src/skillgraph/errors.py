"""Exception hierarchy shared across the package."""


class SkillGraphError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SkillGraphError, ValueError):
    """Caller supplied data that violates a documented precondition."""


class MissingObjectError(InvalidInputError):
    """A referenced object identifier is not present in the world layout."""


class ModelFileError(SkillGraphError):
    """A model or demonstration file could not be loaded.

    Carries a human-readable location (path plus line/column when known) so
    load failures can be diagnosed without opening the file.
    """

    def __init__(self, message: str, *, path: str | None = None, location: str | None = None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if location is not None:
            detail = f"{detail} ({location})"
        super().__init__(detail)
        self.path = path
        self.location = location


class ConsistencyError(SkillGraphError):
    """Internal invariant violated; the model would be left in a bad state."""
