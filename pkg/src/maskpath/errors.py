"""Exception hierarchy shared by every module.

Each error exposes ``code``, the stable name used in machine-readable CLI
output (``{"error": code}``).
"""


class MaskpathError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


class DataError(MaskpathError):
    pass


class SizeMismatch(DataError, ValueError):
    pass


class ZeroDimension(DataError, ValueError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class MaskLoadError(DataError):
    pass


class EmptyMask(DataError, ValueError):
    pass


class DegenerateGeometry(DataError, ValueError):
    pass


class InvalidBox(DataError, ValueError):
    pass


# region codec
class BinOutOfRange(DataError, ValueError):
    pass


class ValueOutOfRange(DataError, ValueError):
    pass


class NonPositiveSize(DataError, ValueError):
    pass


class LengthMismatch(DataError, ValueError):
    pass


# metrics / reward / refinement / evaluation
class EmptyAccumulator(DataError, ValueError):
    pass


class KMismatch(DataError, ValueError):
    pass


class EmptyGroup(DataError, ValueError):
    pass


class InvalidRollout(DataError, ValueError):
    pass


class RefinerContractViolation(MaskpathError, RuntimeError):
    pass


class NonFinite(DataError, ValueError):
    pass


class EmptyDataset(DataError, ValueError):
    pass


class ManifestError(MaskpathError, ValueError):
    pass


class ConfigError(MaskpathError, ValueError):
    pass
