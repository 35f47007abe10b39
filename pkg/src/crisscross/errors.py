"""Exception types shared across the package."""


class CrisscrossError(Exception):
    """Base class for all package errors."""


class HeavyTrafficViolation(CrisscrossError):
    def __init__(self, identity: str, residual: float):
        self.identity = identity
        self.residual = residual
        super().__init__(f"heavy-traffic identity violated: {identity} (residual {residual:.3e})")


class NegativeWorkload(CrisscrossError):
    pass


class NegativeStart(CrisscrossError):
    pass


class NonzeroStart(CrisscrossError):
    pass


class NegativeInput(CrisscrossError):
    pass


class NonPsdCovariance(CrisscrossError):
    pass


class WrongRegime(CrisscrossError):
    pass


class NoConvergence(CrisscrossError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"value iteration did not converge in {iterations} sweeps (residual {residual:.3e})")


class NotConverged(CrisscrossError):
    pass


class GridMismatch(CrisscrossError):
    pass


class InvalidN(CrisscrossError):
    pass


class EpsTooLarge(CrisscrossError):
    pass


class OutOfDomain(CrisscrossError):
    pass


class TooSmallT(CrisscrossError):
    pass


class DegenerateRates(CrisscrossError):
    pass


class ConfigError(CrisscrossError):
    pass


class StageError(CrisscrossError):
    def __init__(self, stage: str, cause: Exception | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
