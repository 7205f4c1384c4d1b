"""Exception and warning types shared across the tracker."""


class ADTrackError(Exception):
    """Base class for all tracker errors."""


class InvalidInput(ADTrackError, ValueError):
    pass


class InvalidConfig(ADTrackError, ValueError):
    pass


class DegenerateInput(ADTrackError, ValueError):
    """Input is valid but the computation has no meaningful result (e.g. an all-black image)."""


class MissingAsset(ADTrackError, FileNotFoundError):
    pass


class FormatError(ADTrackError, ValueError):
    """A sequence or result file does not follow the expected layout."""


class SolverWarning(RuntimeWarning):
    """The ADMM objective kept increasing; the best iterate was returned."""
