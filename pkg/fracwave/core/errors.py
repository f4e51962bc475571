from typing import List, Optional


class FracwaveError(Exception):
    """Base class for every error raised by fracwave"""


class GridTooSmallError(FracwaveError, ValueError):
    def __init__(self, M: int, maxmode: int):
        self.M = M
        self.maxmode = maxmode
        super().__init__(f"Grid with M={M} points per axis cannot carry maxmode K={maxmode}: requires M >= 2K+2 = {2 * maxmode + 2}")


class NonlinearityOverflowError(FracwaveError, ArithmeticError):
    def __init__(self, message: str, time: Optional[float] = None):
        self.time = time
        if time is not None:
            message = f"{message} (t={time:.6g})"
        super().__init__(message)


class ExhaustedTriesError(FracwaveError, RuntimeError):
    def __init__(self, tries: int, accepted: int = 0):
        self.tries = tries
        self.acceptance_rate = accepted / tries if tries else 0.0
        super().__init__(f"Rejection sampler exhausted {tries} tries (observed acceptance rate {self.acceptance_rate:.3g})")


class DegenerateWeightsError(FracwaveError, ValueError):
    def __init__(self, effective_sample_size: float, minimum: float):
        self.effective_sample_size = effective_sample_size
        self.minimum = minimum
        super().__init__(f"Importance weights are degenerate: effective sample size {effective_sample_size:.1f} < {minimum:g}")


class ResolutionError(FracwaveError, ValueError):
    pass


class SamplingResolutionError(FracwaveError, ValueError):
    pass


class ProfileNoReturnError(FracwaveError, RuntimeError):
    pass


class FieldFormatError(FracwaveError, ValueError):
    pass


class ConfigError(FracwaveError, ValueError):
    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("Invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))
