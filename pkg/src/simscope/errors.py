"""Exception hierarchy. Exit codes: 2 usage, 3 data, 4 reconstruction."""


class SimscopeError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UsageError(SimscopeError):
    exit_code = 2


class DataError(SimscopeError):
    """Bad or inconsistent input data (files, dimensions, parameters)."""

    exit_code = 3


class DimensionMismatchError(DataError):
    def __init__(self, axis: str, expected, actual):
        self.axis = axis
        self.expected = expected
        self.actual = actual
        super().__init__(f"dimension mismatch on {axis}: expected {expected}, got {actual}")


class ReconstructionError(SimscopeError):
    exit_code = 4


class DegeneratePhaseSetError(ReconstructionError):
    """Phase set makes the band mixing matrix (near-)singular."""


class PatternNotFoundError(ReconstructionError):
    """Illumination peak not detectable above the noise floor."""

    def __init__(self, message: str, peak_snr: float | None = None):
        self.peak_snr = peak_snr
        if peak_snr is not None:
            message = f"{message} (peak SNR {peak_snr:.2f})"
        super().__init__(message)
