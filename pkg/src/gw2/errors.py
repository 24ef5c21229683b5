"""Exception types shared across the package."""


class GW2Error(Exception):
    """Base class for package errors."""


class LawError(GW2Error):
    """Invalid law kind or parameters."""


class HypothesisError(GW2Error):
    """A tail-prediction was requested outside its hypotheses."""

    def __init__(self, condition, message=""):
        self.condition = condition
        super().__init__(f"hypothesis violated: {condition}" + (f" ({message})" if message else ""))


class UnsupportedProfileError(GW2Error):
    """No prediction covers the requested combination of heavy components."""


class InfiniteMeanError(GW2Error):
    """A finite mean was required but the law has an infinite one."""


class OverflowAbort(GW2Error):
    """A replicate overflowed and could not be classified against the thresholds."""

    def __init__(self, replicate_id):
        self.replicate_id = replicate_id
        super().__init__(f"population count overflow in replicate {replicate_id}")


class ConfigError(GW2Error):
    """Experiment configuration failed to parse or validate."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
