"""Exception types shared across the package."""


class PkmError(Exception):
    """Base class for all package-specific errors."""


class UnreachablePose(PkmError):
    """A requested platform pose lies outside the geometry's reach.

    Carries the index of the first offending via point when raised from a
    path sweep (``index`` is None for single-pose calls).
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateLimb(PkmError):
    """A limb length underflowed the degeneracy threshold, or a limb
    direction lines up with its universal-joint axis; the pose is
    geometrically impossible to assemble."""

    def __init__(self, message, limb=None):
        super().__init__(message)
        self.limb = limb


class NearSingular(PkmError):
    """The secondary-coordinate Jacobian block is numerically singular,
    signalling proximity to a forward (Type-II) singularity."""


class NoConvergence(PkmError):
    """Newton iteration failed to reach the residual tolerance."""


class IllConditioned(PkmError):
    """Newton iteration matrix condition number exceeded the safety bound."""


class EllipseDomain(PkmError):
    """An elliptical-path sample fell outside the domain of the height law."""


class ConfigError(PkmError):
    """A run configuration document is malformed.

    ``field`` holds a dotted path to the offending entry when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
