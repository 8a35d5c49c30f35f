"""Exception types shared across the package."""


class SftEntryError(Exception):
    """Base class for every error raised by this package."""


class NonBinaryEntry(SftEntryError):
    """Transition matrix input contains something other than 0/1."""


class EmptyRowOrColumn(SftEntryError):
    """A symbol has no outgoing or no incoming edge."""


class NotPrimitive(SftEntryError):
    """Matrix is reducible or periodic: no power is entrywise positive."""


class NoConvergence(SftEntryError):
    """Power iteration hit its cap before certifying the eigenpair."""


class CapExceeded(SftEntryError):
    """Word enumeration would produce more items than the caller allows."""


class BadProbabilityVector(SftEntryError):
    """Probability vector is not strictly positive or does not sum to one."""


class PotentialOnForbiddenEdge(SftEntryError):
    """Potential assigns a value to an edge the transition matrix forbids."""


class MixedLength(SftEntryError):
    """Window set mixes words of different lengths."""


class CutoffTooLarge(SftEntryError):
    """Mixing-coefficient enumeration would exceed the pair guard."""


class EmptySet(SftEntryError):
    """A family produced no admissible words at this index."""


class DescriptorInvalid(SftEntryError):
    """Family descriptor violates its own constraints."""


class StateSpaceTooLarge(SftEntryError):
    """Window chain would need more states than the guard allows."""


class HorizonExceeded(SftEntryError):
    """Requested time index lies beyond the computed survival horizon."""


class EmptySample(SftEntryError):
    """Statistic requested on an empty (fully censored) sample."""


class AllCensored(SftEntryError):
    """Every Monte-Carlo trial hit the step cap without entering the target."""


class FamilyNotShrinking(SftEntryError):
    """Check requires a shrinking family but consecutive sets are not nested."""


class MissingArtifacts(SftEntryError):
    """Run directory does not contain the files a plot needs."""


class ConfigError(SftEntryError):
    """Experiment configuration is malformed or contains unknown keys."""
