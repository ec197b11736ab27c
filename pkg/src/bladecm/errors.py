"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`BladeCMError` and
carries an ``exit_code`` so the command line can map failures onto the
documented process exit codes (1 usage, 2 data, 3 numerical).
"""


class BladeCMError(Exception):
    exit_code = 2


class DataError(BladeCMError):
    exit_code = 2


class NumericalError(BladeCMError):
    exit_code = 3


class UsageError(BladeCMError):
    exit_code = 1


class ZeroVarianceChannel(DataError):
    def __init__(self, channel):
        super().__init__(f"channel {channel!r} has zero variance")
        self.channel = channel


class ChannelMismatch(DataError):
    pass


class MissingChannel(DataError):
    def __init__(self, channel):
        super().__init__(f"required channel {channel!r} is missing")
        self.channel = channel


class UnknownChannel(DataError):
    def __init__(self, channel):
        super().__init__(f"unknown channel {channel!r}")
        self.channel = channel


class WindowTooLong(DataError):
    pass


class InvalidFractions(UsageError):
    pass


class InvalidConfig(UsageError):
    pass


class FaultAfterEnd(DataError):
    pass


class MalformedCsv(DataError):
    def __init__(self, line, reason=""):
        msg = f"malformed CSV at line {line}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.line = line


class InsufficientData(DataError):
    pass


class InsufficientRegionData(InsufficientData):
    def __init__(self, region, n_samples=0):
        super().__init__(f"not enough data for region {region} ({n_samples} samples)")
        self.region = region


class DimensionMismatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class MissingModel(DataError):
    def __init__(self, region):
        super().__init__(f"no model for region {region}")
        self.region = region


class ModelVersionMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class NotSymmetric(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class AllZeroSpectrum(NumericalError):
    pass


class NonFiniteWeights(NumericalError):
    pass


class NonFiniteInput(NumericalError):
    pass


class DivergedLoss(NumericalError):
    pass


class NoFeasibleWindow(NumericalError):
    pass
