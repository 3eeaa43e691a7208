"""Exception hierarchy shared by every fairlink module."""


class FairlinkError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(FairlinkError, ValueError):
    pass


class InvalidConfigError(FairlinkError, ValueError):
    pass


class InvalidCalibrationError(InvalidConfigError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnsupportedGeometryError(FairlinkError, ValueError):
    pass


class SingularChannelError(FairlinkError, ArithmeticError):
    def __init__(self, subcarrier, condition):
        super().__init__(
            f"channel matrix on subcarrier {subcarrier} is rank deficient "
            f"(condition number {condition:.3g})"
        )
        self.subcarrier = subcarrier
        self.condition = condition


class InvalidCodeError(FairlinkError, ValueError):
    pass


class AllocationError(FairlinkError):
    pass


class StarvationError(AllocationError):
    def __init__(self, receiver, u_min):
        super().__init__(
            f"receiver {receiver} has no policy reaching its minimum utility {u_min:g}"
        )
        self.receiver = receiver


class InfeasibleBudgetError(AllocationError):
    def __init__(self, needed, budget):
        super().__init__(
            f"minimum-utility policies need {needed:.6g} W but the budget is {budget:.6g} W"
        )
        self.needed = needed
        self.budget = budget


class InstanceTooLargeError(AllocationError):
    pass


class ResolutionError(AllocationError):
    pass


class UndefinedIndexError(FairlinkError, ValueError):
    pass


class InsufficientDataError(FairlinkError, ValueError):
    pass
