"""Exception hierarchy shared by every mixchain module."""


class MixChainError(ValueError):
    """Base class for all errors raised by mixchain."""


class InvalidChain(MixChainError):
    pass


class NotIrreducible(MixChainError):
    pass


class Periodic(MixChainError):
    pass


class NotReversible(MixChainError):
    pass


class TensorTooLarge(MixChainError):
    pass


class ZeroMarginal(MixChainError):
    pass


class TooManyStates(MixChainError):
    pass


class InvalidM(MixChainError):
    pass


class DegenerateEvent(MixChainError):
    pass


class InvalidParams(MixChainError):
    pass


class NonPositiveValue(MixChainError):
    pass


class NoAnchorLag(MixChainError):
    pass


class ConditionFailed(MixChainError):
    def __init__(self, name, message=None):
        self.name = name
        super().__init__(message or f"condition {name!r} failed")


class CalibrationFailed(MixChainError):
    def __init__(self, binding, message=None):
        self.binding = binding
        super().__init__(message or f"calibration failed; binding condition: {binding}")
