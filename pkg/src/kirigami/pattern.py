"""Kirigami cutout geometry, substrate outlines, and the triangulated mid-surface.

Polygons are ``(k, 2)`` arrays of counter-clockwise vertices in mm, without a
repeated closing point.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree


class GeometryError(ValueError):
    """Invalid polygon (self-intersecting, degenerate, wrong orientation)."""


class ResolutionError(ValueError):
    """Target edge length too coarse to resolve a pattern feature."""


# ---------------------------------------------------------------------------
# polygon primitives


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for counter-clockwise loops."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return False


def is_simple(poly) -> bool:
    """True when no two non-adjacent edges properly cross."""
    p = np.asarray(poly, dtype=float)
    k = len(p)
    for i in range(k):
        a1, a2 = p[i], p[(i + 1) % k]
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue
            if _segments_intersect(a1, a2, p[j], p[(j + 1) % k]):
                return False
    return True


def validate_polygon(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
        raise GeometryError(f"polygon must be a (k >= 3, 2) array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise GeometryError("polygon has non-finite coordinates")
    if polygon_area(p) <= 0:
        raise GeometryError("polygon must be counter-clockwise with positive area")
    if not is_simple(p):
        raise GeometryError("polygon is self-intersecting")
    return p


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd ray casting, vectorised over ``points``."""
    pts = np.asarray(points, dtype=float)
    p = np.asarray(poly, dtype=float)
    x, y = pts[:, 0:1], pts[:, 1:2]
    x1, y1 = p[:, 0], p[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    crossings = straddle & (x < xc)
    return (np.count_nonzero(crossings, axis=1) % 2) == 1


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman: ``subject`` (any simple polygon) clipped by the
    convex counter-clockwise polygon ``clip``.

    Concave subjects may come back with zero-width bridging edges; the shoelace
    area of the result is still exact.
    """
    out = [tuple(v) for v in np.asarray(subject, dtype=float)]
    c = np.asarray(clip, dtype=float)
    for i in range(len(c)):
        a, b = c[i], c[(i + 1) % len(c)]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(pt):
            return ex * (pt[1] - a[1]) - ey * (pt[0] - a[0])

        inp, out = out, []
        if not inp:
            break
        prev = inp[-1]
        sp = side(prev)
        for cur in inp:
            sc = side(cur)
            if sc >= 0:
                if sp < 0:
                    t = sp / (sp - sc)
                    out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                out.append(cur)
            elif sp >= 0:
                t = sp / (sp - sc)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, sp = cur, sc
    return np.array(out, dtype=float).reshape(-1, 2)


def _rotate2d(points, degrees):
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    r = np.array([[c, -s], [s, c]])
    return np.asarray(points, dtype=float) @ r.T


# ---------------------------------------------------------------------------
# pattern and substrate


@dataclass(frozen=True)
class KirigamiPattern:
    """Face-layer footprint: one or more disjoint simple polygons.

    ``variant`` is ``"cross"``, ``"lobes"`` or ``"custom"``; ``params`` keeps
    the generating parameters for reporting.
    """

    variant: str
    polygons: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        polys = tuple(validate_polygon(p) for p in self.polygons)
        object.__setattr__(self, "polygons", polys)

    @property
    def area(self) -> float:
        return sum(polygon_area(p) for p in self.polygons)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        inside = np.zeros(len(pts), dtype=bool)
        for p in self.polygons:
            inside |= points_in_polygon(pts, p)
        return inside

    def feature_size(self) -> float | None:
        """Smallest width the mesh has to resolve."""
        if self.variant == "cross":
            return self.params["arm_width"]
        if not self.polygons:
            return None
        return min(
            2.0 * polygon_area(p) / np.sum(np.linalg.norm(p - np.roll(p, -1, axis=0), axis=1))
            for p in self.polygons
        )

    @property
    def symmetric(self) -> bool:
        return self.variant == "cross"


def cross(arm_length: float, arm_width: float) -> KirigamiPattern:
    """Union of two ``arm_length x arm_width`` rectangles along the x and y
    axes, centred at the origin, as one 12-vertex outline."""
    if not 0 < arm_width <= arm_length:
        raise GeometryError(f"cross needs 0 < w <= L, got L={arm_length}, w={arm_width}")
    a, b = arm_length / 2.0, arm_width / 2.0
    outline = [
        (a, -b), (a, b), (b, b), (b, a), (-b, a), (-b, b),
        (-a, b), (-a, -b), (-b, -b), (-b, -a), (b, -a), (b, -b),
    ]
    if arm_width == arm_length:
        outline = [(a, -a), (a, a), (-a, a), (-a, -a)]
    return KirigamiPattern("cross", (np.array(outline),), {"arm_length": arm_length, "arm_width": arm_width})


def lobes(n_lobes: int, radius: float, depth: float = 0.35, n_points: int = 180, phase_deg: float = 0.0):
    """Star-shaped lobe outline ``r(t) = radius (1 - depth (1 - cos(n t)) / 2)``.

    ``n_lobes=1`` gives a unilobe (kidney-like) footprint, ``2`` a bilobe.
    The exact published cut patterns are not dimensioned, so this is an
    approximation; arbitrary outlines can be passed through :func:`custom`.
    """
    if n_lobes < 1 or radius <= 0 or not 0 <= depth < 1:
        raise GeometryError("lobes needs n_lobes >= 1, radius > 0, 0 <= depth < 1")
    t = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    r = radius * (1.0 - depth * (1.0 - np.cos(n_lobes * t)) / 2.0)
    phi = t + math.radians(phase_deg)
    poly = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    return KirigamiPattern("lobes", (poly,), {"n_lobes": n_lobes, "radius": radius, "depth": depth})


def custom(polygons: Sequence) -> KirigamiPattern:
    return KirigamiPattern("custom", tuple(np.asarray(p, dtype=float) for p in polygons))


def empty_pattern() -> KirigamiPattern:
    return KirigamiPattern("custom", ())


@dataclass(frozen=True)
class SubstrateShape:
    """``kind="square"`` with side length ``size`` (optionally rotated by
    ``rotation`` degrees; 45 puts the corners on the axes), or
    ``kind="circle"`` with radius ``size``."""

    kind: str
    size: float
    rotation: float = 0.0
    circle_segments: int = 256

    def __post_init__(self):
        if self.kind not in ("square", "circle"):
            raise GeometryError(f"unknown substrate kind {self.kind!r}")
        if not self.size > 0:
            raise GeometryError("substrate dimension must be positive")
        if self.kind == "circle" and self.circle_segments < 256:
            raise GeometryError("circle must be approximated by at least 256 segments")

    def polygon(self) -> np.ndarray:
        if self.kind == "square":
            h = self.size / 2.0
            sq = np.array([(-h, -h), (h, -h), (h, h), (-h, h)])
            return _snap_symmetric(_rotate2d(sq, self.rotation), self.size)
        t = np.linspace(0.0, 2.0 * np.pi, self.circle_segments, endpoint=False)
        return self.size * np.column_stack([np.cos(t), np.sin(t)])

    @property
    def area(self) -> float:
        return polygon_area(self.polygon())

    @property
    def span(self) -> float:
        """Largest in-plane extent through the centre (diagonal or diameter)."""
        if self.kind == "square":
            return self.size * math.sqrt(2.0) if self.rotation % 90 else self.size
        return 2.0 * self.size


def square(side: float, rotation: float = 0.0) -> SubstrateShape:
    return SubstrateShape("square", side, rotation)


def diamond(diagonal: float) -> SubstrateShape:
    """Square with its corners on the x and y axes, so a cross of arm length
    ``diagonal`` reaches all four corners."""
    return SubstrateShape("square", diagonal / math.sqrt(2.0), 45.0)


def circle(radius: float) -> SubstrateShape:
    return SubstrateShape("circle", radius)


def coverage_fraction(pattern: KirigamiPattern, substrate: SubstrateShape) -> float:
    """Fraction of the substrate area covered by the pattern, by exact clipping.

    Pattern polygons are assumed mutually disjoint.
    """
    clip = substrate.polygon()
    covered = sum(abs(polygon_area(clip_convex(p, clip))) if len(p) else 0.0 for p in pattern.polygons)
    return float(min(max(covered / substrate.area, 0.0), 1.0))


# ---------------------------------------------------------------------------
# mesh


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangulated mid-surface in its bonded (stretched, planar) state.

    ``hinges[k] = (a, b, c, d)``: interior edge ``a-b`` shared by faces
    ``(a, b, c)`` and ``(b, a, d)`` (both counter-clockwise in the plane).
    Rest metrics are per-face Gram matrices of the two edge vectors
    ``x1 - x0`` and ``x2 - x0``; the face-layer metric is NaN on uncovered
    faces.
    """

    vertices: np.ndarray
    faces: np.ndarray
    hinges: np.ndarray
    hinge_faces: np.ndarray
    face_covered: np.ndarray
    rest_metric_substrate: np.ndarray
    rest_metric_face: np.ndarray
    prestretch: float = 1.0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> np.ndarray:
        return _unique_edges(self.faces)

    def planar_metric(self) -> np.ndarray:
        return _edge_gram(self.vertices, self.faces)

    def face_areas(self, positions=None) -> np.ndarray:
        x = self.vertices if positions is None else positions
        e1 = x[self.faces[:, 1]] - x[self.faces[:, 0]]
        e2 = x[self.faces[:, 2]] - x[self.faces[:, 0]]
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    def min_angle_deg(self) -> float:
        x = self.vertices
        angles = []
        for i in range(3):
            a = x[self.faces[:, i]]
            b = x[self.faces[:, (i + 1) % 3]]
            c = x[self.faces[:, (i + 2) % 3]]
            u, v = b - a, c - a
            cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
        return float(np.min(angles))

    def covered_area_fraction(self) -> float:
        a = self.face_areas()
        return float(a[self.face_covered].sum() / a.sum())


def _unique_edges(faces):
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _edge_gram(x, faces):
    e1 = x[faces[:, 1]] - x[faces[:, 0]]
    e2 = x[faces[:, 2]] - x[faces[:, 0]]
    g = np.empty((len(faces), 2, 2))
    g[:, 0, 0] = np.sum(e1 * e1, axis=1)
    g[:, 1, 1] = np.sum(e2 * e2, axis=1)
    g[:, 0, 1] = g[:, 1, 0] = np.sum(e1 * e2, axis=1)
    return g


def build_hinges(faces):
    """Interior edges with the two faces sharing them."""
    nf = len(faces)
    half = {}
    for f in range(nf):
        for k in range(3):
            a, b, c = faces[f, k], faces[f, (k + 1) % 3], faces[f, (k + 2) % 3]
            half[(int(a), int(b))] = (f, int(c))
    hinges, hinge_faces = [], []
    for (a, b), (f, c) in half.items():
        if a < b and (b, a) in half:
            g, d = half[(b, a)]
            hinges.append((a, b, c, d))
            hinge_faces.append((f, g))
    hinges = np.array(hinges, dtype=np.int64).reshape(-1, 4)
    hinge_faces = np.array(hinge_faces, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((hinges[:, 1], hinges[:, 0]))
    return hinges[order], hinge_faces[order]


def _sample_loop(poly, h):
    """Points along a closed polygon with spacing <= ``h``, corners included."""
    pts = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / h - 1e-9)))
        t = np.arange(k)[:, None] / k
        pts.append(a + t * (b - a))
    return np.vstack(pts)


def _hex_lattice(extent, h):
    """Equilateral lattice through the origin, mirror-symmetric about both axes."""
    dy = h * math.sqrt(3.0) / 2.0
    nj = int(math.ceil(extent / dy)) + 1
    ni = int(math.ceil(extent / h)) + 1
    j = np.arange(-nj, nj + 1)
    i = np.arange(-ni, ni + 1)
    jj, ii = np.meshgrid(j, i, indexing="ij")
    x = (ii + 0.5 * (jj % 2)) * h
    y = jj * dy
    return np.column_stack([x.ravel(), y.ravel()])


def _dist_to_segments(points, loop):
    a = loop
    b = np.roll(loop, -1, axis=0)
    ab = b - a
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pkd,kd->pk", ap, ab) / np.einsum("kd,kd->k", ab, ab), 0.0, 1.0)
    d = ap - t[..., None] * ab[None]
    return np.sqrt(np.min(np.einsum("pkd,pkd->pk", d, d), axis=1))


def _snap_symmetric(p, scale):
    p = np.where(np.abs(p) < 1e-12 * scale, 0.0, p)
    return p


def _mesh_convex(outline, pattern, h, smooth_iters=40):
    """Hex lattice inside a convex outline with boundary and pattern-edge
    points inserted, Delaunay triangulated, interior points relaxed."""
    scale = float(np.max(np.abs(outline)))
    boundary = _snap_symmetric(_sample_loop(outline, h), scale)
    features = [boundary]
    for poly in pattern.polygons:
        pts = _sample_loop(poly, h)
        inside = points_in_polygon(pts, outline)
        pts = pts[inside]
        if len(pts):
            pts = pts[_dist_to_segments(pts, outline) > 0.5 * h]
        if len(pts):
            features.append(_snap_symmetric(pts, scale))
    fixed = np.vstack(features)
    fixed = np.unique(np.round(fixed, 12), axis=0)

    lattice = _hex_lattice(scale, h)
    keep = points_in_polygon(lattice, outline)
    lattice = lattice[keep]
    lattice = lattice[_dist_to_segments(lattice, outline) > 0.55 * h]
    if len(fixed) > len(boundary):
        tree = cKDTree(fixed)
        dmin, _ = tree.query(lattice)
        lattice = lattice[dmin > 0.55 * h]
    # keep the centre on a vertex so the default pin sits exactly at the middle
    verts = np.vstack([lattice, fixed])
    n_free = len(lattice)
    free_mask = np.ones(n_free, dtype=bool)
    free_mask[np.all(np.abs(lattice) < 1e-12, axis=1)] = False

    partners = _mirror_partners(verts, h)
    for _ in range(smooth_iters):
        faces = _delaunay(verts)
        nbr_sum = np.zeros_like(verts)
        cnt = np.zeros(len(verts))
        for a, b in [(0, 1), (1, 2), (2, 0)]:
            np.add.at(nbr_sum, faces[:, a], verts[faces[:, b]])
            np.add.at(nbr_sum, faces[:, b], verts[faces[:, a]])
            np.add.at(cnt, faces[:, a], 1)
            np.add.at(cnt, faces[:, b], 1)
        target = nbr_sum[:n_free] / cnt[:n_free, None]
        step = 0.5 * (target - verts[:n_free])
        step[~free_mask] = 0.0
        verts[:n_free] += step
        if partners is not None:
            verts = _symmetrize(verts, partners)
        if np.max(np.abs(step)) < 1e-4 * h:
            break
    return verts, _delaunay(verts)


_MIRRORS = (np.array([1.0, -1.0]), np.array([-1.0, 1.0]), np.array([-1.0, -1.0]))


def _mirror_partners(verts, h):
    """Index of each vertex's image under the x, y and point reflections, or
    None when the point set is not symmetric."""
    tree = cKDTree(verts)
    out = []
    for m in _MIRRORS:
        d, idx = tree.query(verts * m)
        if np.max(d) > 1e-6 * h:
            return None
        out.append(idx)
    return out


def _symmetrize(verts, partners):
    acc = verts.copy()
    for m, idx in zip(_MIRRORS, partners):
        acc += verts[idx] * m
    return acc / 4.0


def _delaunay(verts):
    tri = Delaunay(verts).simplices.astype(np.int64)
    a, b, c = verts[tri[:, 0]], verts[tri[:, 1]], verts[tri[:, 2]]
    cr = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    return tri[np.abs(cr) > 1e-10 * np.max(np.abs(cr))]


def _orient_ccw(verts2d, faces):
    a, b, c = verts2d[faces[:, 0]], verts2d[faces[:, 1]], verts2d[faces[:, 2]]
    cr = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    faces = faces.copy()
    flip = cr < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def _assemble(verts2d, faces, pattern):
    faces = _orient_ccw(verts2d, faces)
    centroids = verts2d[faces].mean(axis=1)
    covered = pattern.contains(centroids) if pattern.polygons else np.zeros(len(faces), dtype=bool)
    verts = np.column_stack([verts2d, np.zeros(len(verts2d))])
    hinges, hinge_faces = build_hinges(faces)
    g = _edge_gram(verts, faces)
    gf = g.copy()
    gf[~covered] = np.nan
    return TriMesh(verts, faces, hinges, hinge_faces, covered, g, gf, 1.0)


def generate_mesh(pattern: KirigamiPattern, substrate: SubstrateShape, target_edge_length: float) -> TriMesh:
    """Triangulate the substrate footprint and flag faces under the pattern.

    Interior vertices come from an equilateral lattice (mirror-symmetric
    about the x and y axes), so hinge bending is direction-independent;
    the substrate outline and the pattern edges are seeded with points so
    face coverage follows the cut lines.
    """
    h = float(target_edge_length)
    if not h > 0:
        raise ValueError("target edge length must be positive")
    feat = pattern.feature_size()
    if feat is not None and h > feat / 4.0:
        raise ResolutionError(f"edge length {h} cannot resolve feature width {feat} (need <= {feat / 4.0})")
    verts, faces = _mesh_convex(substrate.polygon(), pattern, h)
    return _assemble(verts, faces, pattern)


def assign_rest_metrics(mesh: TriMesh, lam: float) -> TriMesh:
    """Bonded-state mesh -> substrate rest metric shrunk by ``1/lam^2``;
    face layers rest at the planar metric (bonded unstretched)."""
    if lam < 1.0:
        raise ValueError(f"prestretch must be >= 1, got {lam}")
    g = mesh.planar_metric()
    gf = g.copy()
    gf[~mesh.face_covered] = np.nan
    return replace(mesh, rest_metric_substrate=g / lam**2, rest_metric_face=gf, prestretch=float(lam))


# ---------------------------------------------------------------------------
# export


def write_obj(path, vertices, faces, precision: int = 9):
    with open(path, "w", newline="\n") as fh:
        for v in vertices:
            fh.write("v " + " ".join(f"{c:.{precision}g}" for c in v) + "\n")
        for f in faces:
            fh.write("f " + " ".join(str(int(i) + 1) for i in f) + "\n")


def read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
    return np.array(verts), np.array(faces, dtype=np.int64)


def write_outline_csv(path, pattern: KirigamiPattern):
    """One row per outline point: ``polygon,x_mm,y_mm``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["polygon", "x_mm", "y_mm"])
        for k, p in enumerate(pattern.polygons):
            for x, y in p:
                w.writerow([k, f"{x:.9g}", f"{y:.9g}"])
