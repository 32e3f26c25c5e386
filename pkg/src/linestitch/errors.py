"""Exception hierarchy shared across the package.

Two broad families matter for the CLI exit codes: input problems
(bad files, invalid correspondence data) exit with code 2, numerical
failures (rank deficiency, singular warps, solver breakdown) with 3.
"""


class StitchError(Exception):
    """Base class for all package errors."""


class InputError(StitchError):
    """Invalid user input: unreadable files, malformed records, bad flags."""


class ParseError(InputError):
    """Correspondence file could not be parsed; message names the record."""


class ValidationError(InputError):
    """Parsed data violates an invariant (bounds, degenerate segments...)."""


class InsufficientMatchesError(InputError):
    """Too few correspondences for the requested estimation."""


class NumericalError(StitchError):
    """Estimation or solving failed for numerical reasons."""


class NoConsensusError(NumericalError):
    """RANSAC could not find a model with enough inliers."""


class RankDeficiencyError(NumericalError):
    """Constraint system does not determine a homography."""


class DegenerateSeparationError(NumericalError):
    """Smallest two singular values are not separated; solution ambiguous."""


class PointAtInfinityError(NumericalError):
    """Homogeneous w-component vanished while dehomogenizing."""


class HorizonError(NumericalError):
    """Point lies on or beyond the projective horizon (1 - c*u <= 0)."""


class SolverFailureError(NumericalError):
    """Sparse least-squares solve failed or left a large residual."""


class CanvasOverflowError(NumericalError):
    """Composited canvas would exceed the configured area cap."""
