"""Exception types shared across the package."""


class NotPositiveDefinite(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class RankDeficient(ValueError):
    pass


class UnsupportedDimension(ValueError):
    pass


class CapacityExceeded(RuntimeError):
    pass


class OutOfRange(ValueError):
    pass


class ConstructionFailed(RuntimeError):
    pass


class BadShape(ValueError):
    pass


class BadLength(ValueError):
    pass


class BadAlphabet(ValueError):
    pass


class NotMod2Invertible(ValueError):
    pass
