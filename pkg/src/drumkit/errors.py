"""Exception hierarchy shared by all drumkit modules."""


class DrumkitError(Exception):
    """Base class for all drumkit errors."""


class GeometryDegenerate(DrumkitError):
    """Triangle or polygon is degenerate (area below tolerance)."""


class GeometryInvalid(DrumkitError):
    """Polygon ring is self-intersecting or otherwise invalid."""


class LayoutOverlap(DrumkitError):
    """Reflection tree produces copies with overlapping interiors."""


class InsufficientPoints(DrumkitError):
    """Too few or collinear points for a rigid fit."""


class MeshInvalid(DrumkitError):
    """Mesh fails a structural validity check."""


class MeshGluingError(DrumkitError):
    """Vertex merge between copies failed beyond tolerance."""


class MeshMismatch(DrumkitError):
    """Two meshes are not compatible for the requested operator."""


class BoundaryDataMissing(DrumkitError):
    """A Robin coefficient is undefined on some boundary edge."""


class SolverSingular(DrumkitError):
    """Factorization of the shifted operator failed."""


class SolverNoConvergence(DrumkitError):
    """Eigenvalue iteration hit its cap before converging.

    Carries the partial spectrum in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InvalidArgument(DrumkitError):
    """Argument violates a documented precondition."""


class RangeExceeded(DrumkitError):
    """Query above the converged part of the spectrum."""


class InsufficientData(DrumkitError):
    """Not enough eigenvalues for the requested diagnostic."""


class TransplantationNotFound(DrumkitError):
    """Exhaustive sign-matrix search ended without a solution."""


class TransplantationInconsistent(DrumkitError):
    """Glued vertices received conflicting values during lifting."""


class NotDisjointnessPreserving(DrumkitError):
    """Operator failed the disjointness test; factorization refused.

    Carries the offending report in ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EmptySupport(DrumkitError):
    """Factored operator has empty support."""


class ComponentNotRigid(DrumkitError):
    """A decomposition component does not fit a rigid motion."""


class InternalInconsistency(DrumkitError):
    """Congruence criteria contradict the component decomposition.

    Carries the diagnostics dict in ``diagnostics``.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
