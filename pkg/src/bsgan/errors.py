"""Exception hierarchy shared by every bsgan module."""


class BsganError(Exception):
    """Base class for all library errors."""


# data
class MissingFile(BsganError, FileNotFoundError):
    pass


class UnparseableCell(BsganError, ValueError):
    def __init__(self, row, col, value):
        super().__init__(f"cannot parse {value!r} as a number (row {row}, column {col!r})")
        self.row = row
        self.col = col
        self.value = value


class UnknownLabelValue(BsganError, ValueError):
    pass


class EmptyClass(BsganError, ValueError):
    pass


class ClassTooSmall(BsganError, ValueError):
    pass


class RecipeError(BsganError, ValueError):
    pass


# sampling / nn shapes
class PoolTooSmall(BsganError, ValueError):
    pass


class DimensionMismatch(BsganError, ValueError):
    pass


class NoDangerPoints(BsganError):
    """Borderline-SMOTE found no minority point in the danger band."""


class BadShape(BsganError, ValueError):
    pass


class ShapeMismatch(BsganError, ValueError):
    pass


class StaleCache(BsganError):
    """A forward cache was used after the network's parameters changed."""


class Diverged(BsganError, FloatingPointError):
    pass


class InsufficientNoise(BsganError, ValueError):
    pass


# metrics
class EmptyBatch(BsganError, ValueError):
    pass


class LengthMismatch(BsganError, ValueError):
    pass


class EmptyMatrix(BsganError, ValueError):
    pass


class OneClassOnly(BsganError, ValueError):
    pass


# harness
class CountMismatch(BsganError):
    def __init__(self, mismatches):
        lines = "; ".join(mismatches)
        super().__init__(f"recipe counts disagree with expectations: {lines}")
        self.mismatches = list(mismatches)


class ConfigError(BsganError, ValueError):
    pass
