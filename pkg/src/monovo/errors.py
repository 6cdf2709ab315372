"""Exception hierarchy shared across the package."""


class MonoVOError(Exception):
    """Base class for all recoverable errors raised by monovo."""


class PointBehindCamera(MonoVOError):
    pass


class ParseError(MonoVOError):
    pass


class TooSmall(MonoVOError):
    pass


class InsufficientFeatures(MonoVOError):
    pass


class InsufficientMatches(MonoVOError):
    pass


class DegenerateConfiguration(MonoVOError):
    pass


class ChiralityAmbiguous(MonoVOError):
    pass


class AtInfinity(MonoVOError):
    pass


class NoValidSamples(MonoVOError):
    pass


class NoConsensus(MonoVOError):
    pass


class InvalidDepth(MonoVOError):
    pass


class InsufficientCorrespondences(MonoVOError):
    pass


class NoConvergence(MonoVOError):
    pass


class DegenerateTrajectory(MonoVOError):
    pass


class LengthMismatch(MonoVOError):
    pass


class TooShort(MonoVOError):
    pass
