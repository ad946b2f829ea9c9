"""Exception types raised by the simulator and analysis pipelines."""


class QjumpsError(Exception):
    """Base class for all package-specific errors."""


class BoundaryBreach(QjumpsError):
    """Wavefunction mass reached the edge of the spatial window."""


class StepTooLarge(QjumpsError):
    """Time step too large: norm loss / total jump probability out of range."""


class DegenerateState(QjumpsError):
    """State has negligible overlap with every detector on the lattice."""


class NotEscaping(QjumpsError):
    """Intensity has not decayed at the horizon; escape-time formula invalid."""


class BadFit(QjumpsError):
    """Least-squares fit rejected (poor residuals or r^2)."""


class ZeroOverlap(QjumpsError):
    """Filter application annihilated the state (post-measurement norm ~ 0)."""


class DegenerateInterval(QjumpsError):
    """Consecutive event times too close for finite-difference inference."""


class InvariantViolation(QjumpsError):
    """A physical invariant (hermiticity, trace, positivity) drifted out of tolerance."""


class SchemaError(QjumpsError):
    """Configuration or data file does not match the documented schema."""
