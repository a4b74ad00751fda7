"""Exception types raised by the toolkit."""


class PlatoonError(Exception):
    """Base class for all toolkit errors."""


class NonPositiveVelocity(PlatoonError):
    """A velocity dropped to or below the spatial-domain floor."""

    def __init__(self, vehicle, position, velocity):
        self.vehicle = vehicle
        self.position = position
        self.velocity = velocity
        super().__init__(
            f"vehicle {vehicle} reached v={velocity:.6g} m/s at s={position:.6g} m; "
            "the spatial description is no longer valid"
        )


class NonFinite(PlatoonError):
    """An integrator stage produced NaN or inf."""


class NonMonotonePosition(PlatoonError):
    pass


class NonMonotoneTime(PlatoonError):
    pass


class NonMonotoneHistory(PlatoonError):
    pass


class HistoryTooShort(PlatoonError):
    pass


class NotHurwitz(PlatoonError):
    pass


class GainNotContractive(PlatoonError):
    """Interconnection gain >= 1: the uniform cascade bound does not exist."""


class HypothesisViolated(PlatoonError):
    pass


class ConfigError(PlatoonError):
    pass
