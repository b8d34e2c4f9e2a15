"""Planar spectral geometry toolkit.

Builds P1 finite element Laplacians on polygonal and glued-triangle
domains, realizes a pair of isospectral seven-triangle drums with their
transplantation operator, and analyzes intertwining operators down to a
congruence decision.
"""

from . import errors
from .eigen import Spectrum, solve_eigs, weyl_fit
from .fem import DiscreteLaplacian, build_laplacian
from .geometry import (
    REFERENCE_TRIANGLE,
    CopyLayout,
    Isometry,
    Polygon,
    Triangle,
    build_propeller_pair,
    fit_isometry,
)
from .mesh import Mesh, mesh_interval, mesh_layout, mesh_rectangle, refine
from .transplant import (
    OperatorMatrix,
    TransplantationMatrix,
    find_transplantation_matrix,
    lift_transplantation,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "Spectrum",
    "solve_eigs",
    "weyl_fit",
    "DiscreteLaplacian",
    "build_laplacian",
    "REFERENCE_TRIANGLE",
    "CopyLayout",
    "Isometry",
    "Polygon",
    "Triangle",
    "build_propeller_pair",
    "fit_isometry",
    "Mesh",
    "mesh_interval",
    "mesh_layout",
    "mesh_rectangle",
    "refine",
    "OperatorMatrix",
    "TransplantationMatrix",
    "find_transplantation_matrix",
    "lift_transplantation",
    "__version__",
]
