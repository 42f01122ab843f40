"""Exception types shared across the package."""


class PtqrmError(Exception):
    """Base class for all numerical and configuration errors."""


class ConfigError(PtqrmError):
    """Invalid model parameters or run configuration."""


class DefectiveMatrixError(PtqrmError):
    """Eigenvector matrix conditioning exceeds the configured threshold.

    Raised near exceptional points, where the eigenvector matrix becomes
    (numerically) defective and a biorthogonal decomposition is unreliable.
    """


class PoleDenominatorError(PtqrmError):
    """A series denominator fell below the pole-proximity cutoff."""


class SeriesNotConvergedError(PtqrmError):
    """Coefficient series tail tolerance unmet at the term cap."""


class NoBracketError(PtqrmError):
    """The targeted eigenvalue pair does not merge inside the search interval."""


class SelectionAmbiguousError(PtqrmError):
    """Block-root selection could not uniquely separate the target pair."""


class TruncationTailError(PtqrmError):
    """Displaced-state expansion tail exceeds the allowed bound; raise n_fock."""


class PhaseAlignmentError(PtqrmError):
    """Neighbouring states are too discontinuous to phase-align (e.g. across an EP)."""


class AtEPError(PtqrmError):
    """Closed-form quantity evaluated exactly at an exceptional point (divergent)."""


class GapClosedError(PtqrmError):
    """The spectral gap fell below the positivity cutoff inside the sweep interval."""
