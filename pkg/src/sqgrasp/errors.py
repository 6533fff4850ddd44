"""Exception types raised across the package."""


class SqGraspError(Exception):
    """Base class for all package-specific errors."""


class SingularParam(SqGraspError):
    """Surface parameter sits on a parameterization singularity or kink."""


class EmptyPatch(SqGraspError):
    """No valid surface parameters survive inside a curvature patch."""


class DegenerateCluster(SqGraspError):
    """Point cluster too small or rank-deficient to seed an ellipsoid."""


class FitDiverged(SqGraspError):
    """Superquadric fit left its bounds, produced NaNs or lost all support."""


class NoRecovery(SqGraspError):
    """Every fitting seed failed; no superquadric could be recovered."""


class NoCandidates(SqGraspError):
    """All grasp candidates were eliminated by the feasibility filters."""


class TooFewPoints(SqGraspError):
    """Input cloud is below the minimum size for planning."""


class EmptyInput(SqGraspError):
    """A metric was asked to operate on an empty or undersized point set."""


class ParseError(SqGraspError):
    """Cloud file could not be parsed.

    Carries the 1-based line number where parsing failed, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnsupportedFormat(SqGraspError):
    """Requested cloud file format is not supported."""


class LengthMismatch(SqGraspError):
    """Parallel input lists have different lengths."""


class NoContact(SqGraspError):
    """Closing line does not intersect the ground-truth geometry."""


class ConfigError(SqGraspError):
    """Pipeline configuration is malformed or fails validation."""
