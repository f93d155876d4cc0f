"""Exception hierarchy shared by all ifspec modules."""


class IfspecError(Exception):
    """Base error. ``code`` is a stable identifier such as ``unknown-state``."""

    def __init__(self, code, message, **details):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.details = details


class ModelError(IfspecError):
    pass


class GenerationError(IfspecError):
    pass


class CompositionError(IfspecError):
    pass


class HarnessError(IfspecError):
    pass


class ConfigError(IfspecError):
    pass
