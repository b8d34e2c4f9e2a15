"""Congruence decisions from operator decompositions, spectra, and geometry.

Exit code contract (honored by the CLI): 0 congruent, 10 not congruent,
20 analysis refused (operator not disjointness-preserving), 30 internal
inconsistency between criteria and decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Point as ShapelyPoint

from .errors import InsufficientData, InternalInconsistency, InvalidArgument
from .eigen import Spectrum, solve_eigs, weyl_fit
from .fem import BoundaryFunction, DiscreteLaplacian, build_laplacian
from .geometry import Isometry, Polygon
from .mesh import mesh_convex_polygon
from .opanalysis import ComponentDecomposition, dense_range_check
from .transplant import OperatorMatrix

AREA_RTOL = 0.01

EXIT_CONGRUENT = 0
EXIT_NOT_CONGRUENT = 10
EXIT_REFUSED = 20
EXIT_INCONSISTENT = 30


@dataclass
class CongruenceResult:
    congruent: bool
    criterion_fired: str
    isometry: object = None
    constant: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CONGRUENT if self.congruent else EXIT_NOT_CONGRUENT

    def to_json(self):
        iso = None
        if isinstance(self.isometry, Isometry):
            iso = {"q": self.isometry.q.tolist(), "t": self.isometry.t.tolist()}
        elif self.isometry is not None:
            iso = {"a": self.isometry.a, "b": self.isometry.b}
        return {
            "congruent": self.congruent,
            "criterion_fired": self.criterion_fired,
            "isometry": iso,
            "constant": self.constant,
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return repr(obj)


def _measure(p) -> float:
    if isinstance(p, Polygon):
        return p.area
    if isinstance(p, (int, float, np.floating)):
        return float(p)
    a, b = p
    return float(b - a)


def decide_congruence(
    dec: ComponentDecomposition,
    p1,
    p2,
    s1: Spectrum | None = None,
    s2: Spectrum | None = None,
    U: OperatorMatrix | None = None,
    lambda1_band: float | None = None,
) -> CongruenceResult:
    """Apply the congruence criteria in order.

    ``p1``/``p2`` are Polygons (2D) or (a, b) interval tuples (1D).
    Criteria: (i) a single component covering the target up to 1% area;
    (ii) equal measures, which must then be consistent with a single
    component; (iii) dense range of U, likewise; (iv) matching bottom
    Dirichlet eigenvalue within the calibrated band.  Any criterion firing
    alongside a multi-component decomposition raises InternalInconsistency.
    """
    vol1, vol2 = _measure(p1), _measure(p2)
    diags = {"vol1": vol1, "vol2": vol2, "n_components": dec.n_components}
    single = dec.n_components == 1
    comp = dec.components[0] if dec.components else None

    def inconsistency(which):
        raise InternalInconsistency(
            f"criterion {which} fired against a {dec.n_components}-component "
            "decomposition",
            diagnostics=diags,
        )

    def result(crit):
        if not single:
            inconsistency(crit)
        if abs(vol1 - vol2) > AREA_RTOL * max(vol1, vol2):
            raise InternalInconsistency(
                f"criterion {crit} fired but measures differ "
                f"({vol1:.6g} vs {vol2:.6g})",
                diagnostics=diags,
            )
        return CongruenceResult(True, crit, comp.iso, comp.constant, diags)

    # (i) one component that fills the whole target domain
    if single and comp.area >= (1.0 - AREA_RTOL) * vol2 and abs(
        vol1 - vol2
    ) <= AREA_RTOL * max(vol1, vol2):
        diags["component_area"] = comp.area
        return CongruenceResult(True, "single_component", comp.iso, comp.constant, diags)

    # (ii) equal measure
    if abs(vol1 - vol2) <= AREA_RTOL * max(vol1, vol2):
        diags["criterion"] = "equal_measure"
        return result("equal_measure")

    # (iii) dense range
    if U is not None:
        rng = dense_range_check(U)
        diags["dense_range"] = rng
        if rng["dense"]:
            return result("dense_range")

    # (iv) bottom eigenvalue match (Dirichlet spectra)
    if s1 is not None and s2 is not None and len(s1) and len(s2):
        l1, l2 = float(s1.eigenvalues[0]), float(s2.eigenvalues[0])
        if lambda1_band is None:
            res = float(np.max(s1.residuals[:1]) + np.max(s2.residuals[:1]))
            lambda1_band = 3.0 * res + 1e-2 * max(abs(l1), abs(l2))
        diags["lambda1"] = {"l1": l1, "l2": l2, "band": lambda1_band}
        if abs(l1 - l2) <= lambda1_band:
            return result("lambda1_match")

    return CongruenceResult(False, "none", None, None, diags)


def nested_rigidity_probe(
    inner: Polygon, outer: Polygon, k: int = 1, levels: int = 4
) -> dict:
    """Discrete Dirichlet eigenvalue gaps for a strictly nested pair.

    Meshes both convex polygons by centroid fans and reports
    lambda_k(inner) - lambda_k(outer) per refinement level; strict
    positivity witnesses the no-shared-eigenvalue rigidity of proper
    inclusions.
    """
    sh_out = outer.shapely()
    for v in inner.ring:
        pt = ShapelyPoint(v)
        if not sh_out.contains(pt) or sh_out.exterior.distance(pt) <= 1e-12:
            raise InvalidArgument("inner polygon must be strictly inside outer")
    gaps = []
    for lv in range(1, levels + 1):
        lam = []
        for poly in (inner, outer):
            m = mesh_convex_polygon(poly.ring, lv)
            L = build_laplacian(m, "dirichlet")
            s = solve_eigs(L, min(k, L.n_dof))
            lam.append(s.eigenvalues[k - 1] if len(s) >= k else np.nan)
        gaps.append(float(lam[0] - lam[1]))
    return {"k": k, "levels": list(range(1, levels + 1)), "gaps": gaps}


def robin_transport_check(
    beta1, iso: Isometry, m2, L2beta: DiscreteLaplacian, m1=None, tol: float = 1e-9
) -> dict:
    """Compare the stored beta2 against beta1 pulled back through tau.

    ``iso`` maps the second domain onto the first; beta1 must be a constant
    or a callable of position.
    """
    if L2beta.beta is None:
        raise InvalidArgument("second Laplacian carries no boundary function")
    if not isinstance(beta1, BoundaryFunction):
        beta1 = BoundaryFunction(beta1)
    if isinstance(beta1.spec, dict):
        raise InvalidArgument("tag-wise beta1 cannot be pulled back pointwise")
    b2 = L2beta.beta.values_on_boundary(m2)
    diffs = {}
    for v, val2 in b2.items():
        src = iso.apply(m2.vertices[v])
        if m1 is not None:
            from .opanalysis import _boundary_distance

            if _boundary_distance(m1, src[None] if src.ndim == 1 else src)[0] > tol + m1.mesh_size():
                raise InvalidArgument(
                    f"isometry sends boundary vertex {v} off the first boundary"
                )
        if callable(beta1.spec):
            val1 = float(beta1.spec(src))
        else:
            val1 = float(beta1.spec)
        diffs[v] = abs(val2 - val1)
    return {"max_diff": max(diffs.values()) if diffs else 0.0, "per_vertex": diffs}


def dimension_volume_report(s: Spectrum) -> dict:
    """Weyl-law dimension and volume estimates for diagnostics."""
    if len(s) < 50:
        raise InsufficientData("need at least 50 eigenvalues")
    return weyl_fit(s)
