"""Exception types shared across the package."""


class SlideError(Exception):
    """Base class for all slidelab errors."""


class ActionValidationError(SlideError):
    """A raw maneuver action violates the action-space constraints."""


class AccelOutOfRange(ActionValidationError):
    pass


class DurationOutOfRange(ActionValidationError):
    pass


class SameSignAccels(ActionValidationError):
    pass


class ZeroInitialAccel(ActionValidationError):
    pass


class PadTooShort(SlideError):
    """Requested trace window is shorter than the maneuver."""


class DegenerateTrace(SlideError):
    """A trace is unusable (empty, non-monotone time, wrong channel count)."""


class DimensionMismatch(SlideError):
    """Array shapes do not match a network's declared sizes."""


class Unreachable(SlideError):
    """No maneuver of the allowed family can produce the requested slide."""


class RomExceeded(SlideError):
    """The solved maneuver needs more platform travel than the workspace allows."""


class DivisionByZero(SlideError):
    """Correction metric is undefined because the prior estimate is exact."""


class ConfigError(SlideError):
    """A config document is malformed or contains unknown keys."""


class CheckpointError(SlideError):
    """A checkpoint file is missing, truncated, or inconsistent."""
