"""Exception types raised by the numerical routines.

Every failure mode has its own class so that the command line runner can
report the library error name verbatim.
"""


class NHGeomError(Exception):
    """Base class for all library errors."""


class NonFinite(NHGeomError):
    pass


class NearDefective(NHGeomError):
    """Eigenvector matrix is too ill-conditioned (close to an exceptional point)."""


class SelfOrthogonal(NHGeomError):
    """A bi-orthogonal normalisation denominator vanishes."""


class AmbiguousMatch(NHGeomError):
    pass


class BandCrossing(NHGeomError):
    pass


class CFLViolation(NHGeomError):
    """Time step too large for the fastest scale of the generator."""


class NonFiniteState(NHGeomError):
    pass


class BandGapCollapse(NHGeomError):
    pass


class VanishingNorm(NHGeomError):
    pass


class TruncationUnresolved(NHGeomError):
    """Plane-wave cutoff too small for the requested band."""


class VanishingOverlap(NHGeomError):
    pass


class GaugeNotSmoothed(NHGeomError):
    pass


class NotSingleStationary(NHGeomError):
    pass


class StationaryDecays(NHGeomError):
    pass


class NotTwoLevel(NHGeomError):
    pass


class DegenerateSpectrum(NHGeomError):
    pass


class UnknownModel(NHGeomError):
    pass


class ConfigError(NHGeomError):
    pass


class SpreadBelowBound(NHGeomError):
    pass
