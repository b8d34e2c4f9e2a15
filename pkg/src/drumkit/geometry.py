"""Planar polygons, rigid motions, and the seven-copy propeller layouts.

Copy indices in layouts and gluing records are 1-based (copy 1 is the
template itself); template edge ``e`` joins triangle vertices ``e`` and
``(e + 1) % 3``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.ops import unary_union

from .errors import (
    GeometryDegenerate,
    GeometryInvalid,
    InsufficientPoints,
    LayoutOverlap,
)

EPS_GEOM = 1e-9
ORTHO_TOL = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[-1] != 2 or not np.all(np.isfinite(pts)):
        raise GeometryInvalid("expected finite planar points of shape (n, 2)")
    return pts


def shoelace_area(ring: np.ndarray) -> float:
    """Signed area of a closed polygonal ring (positive if counterclockwise)."""
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Triangle:
    """Triangle with labelled vertices a, b, c.

    Freshly constructed triangles are counterclockwise; triangles obtained
    by reflection keep their vertex labels and are clockwise (orientation
    -1).  Degenerate triangles are rejected.
    """

    verts: np.ndarray

    def __post_init__(self):
        v = _as_points(self.verts)
        if v.shape != (3, 2):
            raise GeometryInvalid("triangle needs exactly three vertices")
        object.__setattr__(self, "verts", v)
        if abs(self.signed_area) <= EPS_GEOM:
            raise GeometryDegenerate(f"triangle area {self.signed_area} below {EPS_GEOM}")
        v.setflags(write=False)

    @property
    def signed_area(self) -> float:
        return shoelace_area(self.verts)

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def orientation(self) -> int:
        return 1 if self.signed_area > 0 else -1

    def edge(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of edge e, joining vertices e and (e + 1) % 3."""
        return self.verts[e % 3], self.verts[(e + 1) % 3]

    def side_lengths(self) -> np.ndarray:
        """Lengths of edges 0, 1, 2."""
        return np.array(
            [np.linalg.norm(self.verts[(e + 1) % 3] - self.verts[e]) for e in range(3)]
        )

    def is_scalene(self, tol: float = EPS_GEOM) -> bool:
        s = np.sort(self.side_lengths())
        return bool(np.min(np.diff(s)) > tol)

    def shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.verts)


@dataclass(frozen=True)
class Isometry:
    """Rigid motion x -> q @ x + t with q orthogonal."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(2, 2)
        t = np.asarray(self.t, dtype=float).reshape(2)
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(t)):
            raise GeometryInvalid("isometry entries must be finite")
        if np.max(np.abs(q.T @ q - np.eye(2))) > 1e-9:
            raise GeometryInvalid("matrix is not orthogonal")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)
        q.setflags(write=False)
        t.setflags(write=False)

    @classmethod
    def identity(cls) -> "Isometry":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def rotation(cls, angle: float, translation=(0.0, 0.0)) -> "Isometry":
        c, s = np.cos(angle), np.sin(angle)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=float))

    @classmethod
    def reflection(cls, p0, p1) -> "Isometry":
        """Reflection across the line through p0 and p1."""
        p0 = np.asarray(p0, dtype=float)
        d = np.asarray(p1, dtype=float) - p0
        nrm = np.linalg.norm(d)
        if nrm <= EPS_GEOM:
            raise GeometryDegenerate("reflection axis endpoints coincide")
        u = d / nrm
        q = 2.0 * np.outer(u, u) - np.eye(2)
        return cls(q, p0 - q @ p0)

    @property
    def orientation(self) -> int:
        return 1 if np.linalg.det(self.q) > 0 else -1

    def apply(self, points) -> np.ndarray:
        pts = _as_points(points)
        out = pts @ self.q.T + self.t
        return out[0] if np.asarray(points).ndim == 1 else out

    def compose(self, other: "Isometry") -> "Isometry":
        """self after other: x -> self(other(x))."""
        return Isometry(self.q @ other.q, self.q @ other.t + self.t)

    def inverse(self) -> "Isometry":
        return Isometry(self.q.T, -self.q.T @ self.t)


@dataclass(frozen=True)
class Polygon:
    """Simple counterclockwise polygon."""

    ring: np.ndarray

    def __post_init__(self):
        ring = _as_points(self.ring)
        if ring.shape[0] < 3:
            raise GeometryInvalid("polygon needs at least three vertices")
        sp = ShapelyPolygon(ring)
        if not sp.is_valid or sp.is_empty:
            raise GeometryInvalid("polygon ring is self-intersecting")
        if shoelace_area(ring) < 0:
            ring = ring[::-1].copy()
        object.__setattr__(self, "ring", ring)
        if self.area <= EPS_GEOM:
            raise GeometryDegenerate("polygon area below tolerance")
        ring.setflags(write=False)

    @property
    def area(self) -> float:
        return shoelace_area(self.ring)

    def side_lengths(self) -> np.ndarray:
        d = np.roll(self.ring, -1, axis=0) - self.ring
        return np.linalg.norm(d, axis=1)

    def contains(self, point, tol: float = EPS_GEOM) -> bool:
        return bool(ShapelyPolygon(self.ring).buffer(tol).contains(ShapelyPoint(point)))

    def shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.ring)

    def to_json(self) -> dict:
        return {"ring": self.ring.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "Polygon":
        return cls(np.asarray(doc["ring"], dtype=float))


def polygon_area(p: Polygon) -> float:
    """Shoelace area of a simple polygon."""
    return p.area


def reflect_across_edge(tri: Triangle, edge: int) -> Triangle:
    """Mirror image of ``tri`` across edge ``edge``; shares that edge exactly."""
    p0, p1 = tri.edge(edge)
    refl = Isometry.reflection(p0, p1)
    return Triangle(refl.apply(tri.verts))


def fit_isometry(src, dst) -> tuple[Isometry, float]:
    """Least-squares rigid fit mapping src points onto dst points.

    Orthogonal Procrustes; both orientation signs are tried and the better
    fit wins.  Returns the isometry and the RMS residual.
    """
    src = _as_points(src)
    dst = _as_points(dst)
    if src.shape != dst.shape or src.shape[0] < 3:
        raise InsufficientPoints("need at least three point pairs")
    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    a = src - c_src
    b = dst - c_dst
    if np.linalg.matrix_rank(a, tol=EPS_GEOM * (1.0 + np.max(np.abs(a)))) < 2:
        raise InsufficientPoints("source points are collinear")
    h = a.T @ b
    u, _, vt = np.linalg.svd(h)
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    best = None
    for sign in (1.0, -1.0):
        # optimal orthogonal map with det constrained to `sign`
        q = v @ np.diag([1.0, sign * d]) @ u.T
        t = c_dst - q @ c_src
        res = src @ q.T + t - dst
        rms = float(np.sqrt(np.mean(np.sum(res**2, axis=1))))
        if best is None or rms < best[1]:
            best = (Isometry(q, t), rms)
    return best


@dataclass(frozen=True)
class CopyLayout:
    """Domain assembled from isometric copies of one template triangle.

    ``copies[i]`` (i 1-based) maps copy i onto the template; ``gluing``
    records shared edges as (copy i, edge e, copy j, edge f) with template
    edge labels.
    """

    template: Triangle
    copies: dict[int, Isometry]
    gluing: tuple[tuple[int, int, int, int], ...]
    tree: tuple[tuple[int, int, int], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "copies", dict(self.copies))
        object.__setattr__(self, "gluing", tuple(tuple(g) for g in self.gluing))
        object.__setattr__(self, "tree", tuple(tuple(r) for r in self.tree))

    @property
    def n_copies(self) -> int:
        return len(self.copies)

    def copy_triangle(self, i: int) -> Triangle:
        return Triangle(self.copies[i].inverse().apply(self.template.verts))

    def copy_orientation(self, i: int) -> int:
        return self.copies[i].orientation

    def total_area(self) -> float:
        return self.n_copies * self.template.area

    def boundary_edges(self) -> list[tuple[int, int]]:
        """(copy, edge) pairs on the outer boundary."""
        glued = {(g[0], g[1]) for g in self.gluing} | {(g[2], g[3]) for g in self.gluing}
        return [
            (i, e) for i in sorted(self.copies) for e in range(3) if (i, e) not in glued
        ]

    def glued_partner(self, i: int, e: int):
        """Copy/edge glued to (i, e), or None if (i, e) is a boundary edge."""
        for gi, ge, gj, gf in self.gluing:
            if (gi, ge) == (i, e):
                return gj, gf
            if (gj, gf) == (i, e):
                return gi, ge
        return None

    def boundary_polygon(self) -> Polygon:
        union = unary_union(
            [self.copy_triangle(i).shapely() for i in sorted(self.copies)]
        )
        if union.geom_type != "Polygon" or len(union.interiors) > 0:
            raise GeometryInvalid("copy union is not a simple polygon")
        ring = np.asarray(union.exterior.coords[:-1], dtype=float)
        return Polygon(ring)

    def to_json(self) -> dict:
        return {
            "template": self.template.verts.tolist(),
            "copies": [
                {"i": i, "q": self.copies[i].q.tolist(), "t": self.copies[i].t.tolist()}
                for i in sorted(self.copies)
            ],
            "gluing": [list(g) for g in self.gluing],
            "tree": [list(r) for r in self.tree],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CopyLayout":
        template = Triangle(np.asarray(doc["template"], dtype=float))
        copies = {
            int(c["i"]): Isometry(np.asarray(c["q"]), np.asarray(c["t"]))
            for c in doc["copies"]
        }
        return cls(
            template,
            copies,
            tuple(tuple(g) for g in doc["gluing"]),
            tuple(tuple(r) for r in doc.get("tree", [])),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "CopyLayout":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def build_layout_from_tree(template: Triangle, tree) -> CopyLayout:
    """Assemble a layout by reflecting along a tree of (child, parent, edge).

    Copy 1 is the template in place; each record reflects the parent copy
    across its (template-labelled) edge.  Raises LayoutOverlap if two copy
    interiors intersect.
    """
    tris = {1: template}
    isos = {1: Isometry.identity()}
    gluing = []
    for child, parent, e in tree:
        if parent not in tris or child in tris:
            raise GeometryInvalid(f"bad tree record {(child, parent, e)}")
        # physical edge of the parent copy carrying template label e
        ppts = isos[parent].inverse().apply(template.verts)
        p0, p1 = ppts[e % 3], ppts[(e + 1) % 3]
        refl = Isometry.reflection(p0, p1)
        tris[child] = Triangle(refl.apply(tris[parent].verts))
        isos[child] = isos[parent].compose(refl)  # refl is its own inverse
        gluing.append((parent, e, child, e))

    shapes = {i: tris[i].shapely() for i in tris}
    area = template.area
    keys = sorted(shapes)
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            inter = shapes[keys[a]].intersection(shapes[keys[b]]).area
            if inter > 1e-9 * area:
                raise LayoutOverlap(
                    f"copies {keys[a]} and {keys[b]} overlap (area {inter:.3e})"
                )
    layout = CopyLayout(template, isos, tuple(gluing), tuple(tuple(r) for r in tree))
    layout.boundary_polygon()  # raises GeometryInvalid on a non-simple union
    return layout


# Reflection trees of the two seven-triangle propeller domains: a hub
# triangle, three blades attached across its edges, and one tip triangle per
# blade.  Derived by exhaustive search over the blade-tip attachments
# (scripts/derive_propeller.py); the two trees below are the lexicographically
# first non-congruent pair admitting a sign transplantation matrix.
PROPELLER_TREE_1 = ((2, 1, 0), (3, 1, 1), (4, 1, 2), (5, 2, 1), (6, 3, 2), (7, 4, 0))
PROPELLER_TREE_2 = ((2, 1, 0), (3, 1, 1), (4, 1, 2), (5, 2, 2), (6, 3, 0), (7, 4, 1))


def build_propeller_pair(template: Triangle) -> tuple[CopyLayout, CopyLayout]:
    """The two isospectral seven-copy propeller layouts over ``template``."""
    if not template.is_scalene():
        raise GeometryDegenerate("propeller template must be scalene")
    layout1 = build_layout_from_tree(template, PROPELLER_TREE_1)
    layout2 = build_layout_from_tree(template, PROPELLER_TREE_2)
    return layout1, layout2


def layouts_congruent(l1: CopyLayout, l2: CopyLayout, tol: float = 1e-9) -> bool:
    """Cheap congruence test: compare sorted boundary side-length multisets."""
    s1 = np.sort(l1.boundary_polygon().side_lengths())
    s2 = np.sort(l2.boundary_polygon().side_lengths())
    if s1.shape != s2.shape:
        return False
    return bool(np.max(np.abs(s1 - s2)) <= tol * (1.0 + np.max(s1)))


REFERENCE_TRIANGLE = Triangle(np.array([[0.0, 0.0], [5.0, 0.0], [1.8, 2.4]]))
