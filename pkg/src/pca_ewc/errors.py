"""Exception types raised across the package."""


class PcaEwcError(Exception):
    """Base class for all package errors."""


class InvalidData(PcaEwcError, ValueError):
    pass


class DimensionMismatch(PcaEwcError, ValueError):
    pass


class ZeroVarianceColumn(PcaEwcError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"column {index} has zero variance")


class RankDeficient(PcaEwcError, ValueError):
    pass


class NonPositivePrior(PcaEwcError, ValueError):
    pass


class SvdFailure(PcaEwcError, ArithmeticError):
    pass


class SingularScoreCovariance(PcaEwcError, ArithmeticError):
    pass


class InsufficientData(PcaEwcError, ValueError):
    pass


class DegenerateSample(PcaEwcError, ValueError):
    pass


class LengthMismatch(PcaEwcError, ValueError):
    pass


class ModeOrderError(PcaEwcError, ValueError):
    """Raised when modes are absorbed out of sequence."""


class UnknownDataId(PcaEwcError, ValueError):
    pass


class SpecOutOfRange(PcaEwcError, ValueError):
    pass


class UnknownScenario(PcaEwcError, ValueError):
    pass


class OnsetOutOfRange(PcaEwcError, ValueError):
    pass


class ModelFileCorrupt(PcaEwcError, ValueError):
    pass


class ConfigError(PcaEwcError, ValueError):
    """Bad run configuration; message names the key and value."""


class RunFailure(PcaEwcError, RuntimeError):
    def __init__(self, seed, cause):
        self.seed = seed
        self.cause = cause
        super().__init__(f"experiment run with seed {seed} failed: {cause}")


class IoFailure(PcaEwcError, OSError):
    pass
