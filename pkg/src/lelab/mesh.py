"""Planar domains and P1 triangulations.

Three domain kinds are supported: the unit disk, axis-aligned rectangles
anchored at the origin, and simple polygons.  Meshes may carry graded
patches, i.e. structured ring triangulations around prescribed points whose
innermost spacing can be many orders of magnitude below the background edge
length.  The nodal Lane-Emden solutions concentrate on scales like
exp(-p/4), which no uniform mesh can resolve.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the computational domain.

    ``kind`` is one of ``"disk"`` (unit disk centred at the origin),
    ``"rectangle"`` (``[0, width] x [0, height]``) or ``"polygon"``.
    """

    kind: str
    width: float = 1.0
    height: float = 1.0
    vertices: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("disk", "rectangle", "polygon"):
            raise MeshError(f"unknown domain kind {self.kind!r}")
        if self.kind == "rectangle" and not (self.width > 0 and self.height > 0):
            raise MeshError("rectangle width and height must be positive")
        if self.kind == "polygon":
            if len(self.vertices) < 3:
                raise MeshError("polygon needs at least three vertices")
            poly = np.asarray(self.vertices, dtype=float)
            if _signed_area(poly) <= 0:
                raise MeshError("polygon must be positively oriented")
            if _self_intersects(poly):
                raise MeshError("polygon is self-intersecting")

    @classmethod
    def disk(cls) -> "DomainSpec":
        return cls("disk")

    @classmethod
    def rectangle(cls, width: float = 1.0, height: float = 1.0) -> "DomainSpec":
        return cls("rectangle", width=float(width), height=float(height))

    @classmethod
    def polygon(cls, vertices) -> "DomainSpec":
        return cls("polygon", vertices=tuple((float(x), float(y)) for x, y in vertices))

    @classmethod
    def parse(cls, text: str) -> "DomainSpec":
        """Parse ``disk``, ``square``, ``rectangle:W,H`` or ``polygon:x,y;x,y;...``."""
        text = text.strip().lower()
        if text in ("disk", "unit-disk"):
            return cls.disk()
        if text in ("square", "unit-square"):
            return cls.rectangle(1.0, 1.0)
        if text.startswith("rectangle"):
            _, _, dims = text.partition(":")
            w, hgt = (float(v) for v in dims.split(",")) if dims else (1.0, 1.0)
            return cls.rectangle(w, hgt)
        if text.startswith("polygon:"):
            pts = [tuple(float(v) for v in s.split(",")) for s in text[8:].split(";")]
            return cls.polygon(pts)
        raise MeshError(f"cannot parse domain {text!r}")

    def label(self) -> str:
        if self.kind == "disk":
            return "disk"
        if self.kind == "rectangle":
            return f"rectangle:{self.width:g},{self.height:g}"
        return "polygon:" + ";".join(f"{x:g},{y:g}" for x, y in self.vertices)

    @property
    def center(self) -> np.ndarray:
        if self.kind == "disk":
            return np.zeros(2)
        if self.kind == "rectangle":
            return np.array([self.width / 2, self.height / 2])
        return np.asarray(self.vertices).mean(axis=0)

    @property
    def diameter(self) -> float:
        if self.kind == "disk":
            return 2.0
        if self.kind == "rectangle":
            return math.hypot(self.width, self.height)
        poly = np.asarray(self.vertices)
        d = poly[:, None, :] - poly[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    @property
    def area(self) -> float:
        if self.kind == "disk":
            return math.pi
        if self.kind == "rectangle":
            return self.width * self.height
        return _signed_area(np.asarray(self.vertices))

    def polygon_vertices(self) -> np.ndarray:
        if self.kind == "rectangle":
            w, hgt = self.width, self.height
            return np.array([[0, 0], [w, 0], [w, hgt], [0, hgt]], dtype=float)
        if self.kind == "polygon":
            return np.asarray(self.vertices, dtype=float)
        raise MeshError("the disk has no polygon representation")

    def boundary_distance(self, pts) -> np.ndarray:
        """Signed distance to the boundary, positive inside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "disk":
            return 1.0 - np.hypot(pts[:, 0], pts[:, 1])
        poly = self.polygon_vertices()
        dist = _polygon_edge_distance(poly, pts)
        inside = _points_in_polygon(poly, pts)
        return np.where(inside, dist, -dist)

    def contains(self, pts, margin: float = 0.0) -> np.ndarray:
        return self.boundary_distance(pts) > margin


@dataclass(frozen=True)
class GradedPatch:
    """Structured ring triangulation refining the mesh around ``center``.

    The core is a small uniform disk of spacing ``core``; beyond radius
    ``8 * core`` the rings grow geometrically with ``n_outer`` points each
    until ``radius`` is reached.
    """

    center: tuple[float, float]
    core: float
    radius: float
    n_outer: int = 48


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float
    domain: DomainSpec = field(default_factory=DomainSpec.disk)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def areas(self) -> np.ndarray:
        return _triangle_areas(self.vertices, self.triangles)

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def _kdtree(self) -> cKDTree:
        return cKDTree(self.vertices)

    @cached_property
    def _vertex_triangles(self) -> list[np.ndarray]:
        order = np.argsort(self.triangles.ravel(), kind="stable")
        counts = np.bincount(self.triangles.ravel(), minlength=self.n_vertices)
        splits = np.cumsum(counts)[:-1]
        return np.split(order // 3, splits)

    def max_edge(self) -> float:
        e = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.hypot(e[:, 0], e[:, 1]).max())

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.triangles).astype(np.int64).tobytes())
        return h.hexdigest()[:16]

    def locate(self, point) -> tuple[int, np.ndarray]:
        """Return ``(triangle index, barycentric coordinates)`` of ``point``."""
        pt = np.asarray(point, dtype=float)
        _, near = self._kdtree.query(pt, k=min(8, self.n_vertices))
        cand = np.unique(np.concatenate([self._vertex_triangles[i] for i in np.atleast_1d(near)]))
        hit = _barycentric_hit(self.vertices, self.triangles[cand], pt)
        if hit is not None:
            k, lam = hit
            return int(cand[k]), lam
        hit = _barycentric_hit(self.vertices, self.triangles, pt)
        if hit is not None:
            return int(hit[0]), hit[1]
        d = np.hypot(*(self.centroids - pt).T)
        raise MeshError(f"point {tuple(pt)} lies outside the mesh "
                        f"(nearest triangle {int(d.argmin())})")

    def to_json(self) -> dict:
        return {
            "domain": self.domain.label(),
            "h": self.h,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary": self.boundary.astype(int).tolist(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def from_json(cls, data: dict) -> "Mesh":
        return cls(
            vertices=np.asarray(data["vertices"], dtype=float),
            triangles=np.asarray(data["triangles"], dtype=np.int64),
            boundary=np.asarray(data["boundary"], dtype=bool),
            h=float(data["h"]),
            domain=DomainSpec.parse(data.get("domain", "disk")),
        )

    @classmethod
    def load(cls, path) -> "Mesh":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_mesh(spec: DomainSpec, h: float, patches: Sequence[GradedPatch] = (),
               symmetric: bool = False) -> Mesh:
    """Triangulate ``spec`` with target edge length ``h``.

    With ``symmetric=True`` the mesh is generated on half of the domain and
    completed by the point reflection through the domain centre, so that
    odd solutions ``u(c - x) = -u(c + x)`` are exactly representable.  In
    that case ``patches`` must be given for one half only; the mirror images
    are added automatically.
    """
    if not h > 0:
        raise MeshError("h must be positive")
    if h >= spec.diameter / 4:
        raise MeshError(f"h={h} must be below diameter/4 = {spec.diameter / 4:g}")
    for patch in patches:
        c = np.asarray(patch.center, dtype=float)
        if spec.boundary_distance(c)[0] < patch.radius + 2 * h:
            raise MeshError(f"patch at {patch.center} too close to the boundary")
    if symmetric and spec.kind == "polygon":
        raise MeshError("symmetric meshes are only available for the disk and rectangles")

    if symmetric:
        centre = spec.center
        normal = _cut_normal(spec, patches)
        pts = _background_points(spec, h, halfplane=(centre, normal))
        verts, tris = _triangulate_with_patches(spec, h, pts, patches, halfplane=(centre, normal))
        verts, tris = _point_reflect(verts, tris, centre, normal, h)
    else:
        all_patches = list(patches)
        pts = _background_points(spec, h)
        verts, tris = _triangulate_with_patches(spec, h, pts, all_patches)

    tris = _orient(verts, tris)
    boundary = _boundary_flags(len(verts), tris)
    if spec.kind == "disk":
        r = np.hypot(verts[boundary, 0], verts[boundary, 1])
        verts[boundary] /= r[:, None]
    mesh = Mesh(verts, tris, boundary, float(h), spec)
    _validate(mesh)
    return mesh


def mirrored_patch(spec: DomainSpec, patch: GradedPatch) -> GradedPatch:
    c = 2 * spec.center - np.asarray(patch.center)
    return GradedPatch((float(c[0]), float(c[1])), patch.core, patch.radius, patch.n_outer)


# --------------------------------------------------------------------------
# background point sets


def _background_points(spec: DomainSpec, h: float, halfplane=None) -> np.ndarray:
    if spec.kind == "disk":
        pts = _disk_points(h)
    elif spec.kind == "rectangle":
        pts = _rectangle_points(spec.width, spec.height, h)
    else:
        pts = _polygon_points(spec.polygon_vertices(), h)
    if halfplane is None:
        return pts
    c, n = halfplane
    s = (pts - c) @ n
    keep = s > 0.35 * h
    cut = _cut_line_points(spec, h, c, n)
    return np.vstack([pts[keep], cut])


def _disk_points(h: float) -> np.ndarray:
    n_rings = max(2, int(round(1.0 / h)))
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        r = k / n_rings
        m = 4 * max(2, int(math.ceil(2 * math.pi * r / h / 4)))
        t = 2 * math.pi * np.arange(m) / m
        ring = np.column_stack([r * np.cos(t), r * np.sin(t)])
        # quarter-turn angles land exactly on the axes
        ring[np.abs(ring) < 1e-15] = 0.0
        pts.append(ring)
    return np.vstack(pts)


def _rectangle_points(w: float, hgt: float, h: float) -> np.ndarray:
    nx = max(2, int(math.ceil(w / h)))
    ny = max(2, int(math.ceil(hgt / h)))
    xs = np.linspace(0.0, w, nx + 1)
    ys = np.linspace(0.0, hgt, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _polygon_points(poly: np.ndarray, h: float) -> np.ndarray:
    bnd = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / h)))
        t = np.arange(n)[:, None] / n
        bnd.append(a + t * (b - a))
    bnd = np.vstack(bnd)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    s = 0.9 * h  # slightly denser lattice keeps the boundary gap triangles below 1.5 h
    dy = s * math.sqrt(3) / 2
    rows = []
    for j, y in enumerate(np.arange(lo[1], hi[1] + dy, dy)):
        xs = np.arange(lo[0] + (s / 2 if j % 2 else 0.0), hi[0] + s, s)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    grid = np.vstack(rows)
    inside = _points_in_polygon(poly, grid) & (_polygon_edge_distance(poly, grid) > 0.4 * h)
    return np.vstack([bnd, grid[inside]])


def _cut_normal(spec: DomainSpec, patches) -> np.ndarray:
    if patches:
        d = np.asarray(patches[0].center, dtype=float) - spec.center
        if np.linalg.norm(d) > 1e-12:
            return d / np.linalg.norm(d)
    return np.array([1.0, 0.0])


def _cut_line_points(spec: DomainSpec, h: float, c: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Points on the line through ``c`` orthogonal to ``n``, symmetric about ``c``."""
    t = np.array([-n[1], n[0]])
    # half-length of the chord inside the domain
    lo, hi = 0.0, spec.diameter
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if spec.boundary_distance(c + mid * t)[0] > 0:
            lo = mid
        else:
            hi = mid
    half = 0.5 * (lo + hi)
    m = max(1, int(math.ceil(half / h)))
    s = np.linspace(-half, half, 2 * m + 1)
    pts = c + s[:, None] * t
    if spec.kind == "disk":
        ends = np.array([0, -1])
        pts[ends] /= np.hypot(pts[ends, 0], pts[ends, 1])[:, None]
    else:
        pts[[0, -1]] = _snap_to_polygon(spec.polygon_vertices(), pts[[0, -1]])
    return pts


def _snap_to_polygon(poly, pts):
    out = []
    for p in pts:
        best, bd = p, np.inf
        for a, b in zip(poly, np.roll(poly, -1, axis=0)):
            ab = b - a
            s = np.clip((p - a) @ ab / (ab @ ab), 0, 1)
            q = a + s * ab
            d = np.linalg.norm(p - q)
            if d < bd:
                best, bd = q, d
        out.append(best)
    return np.array(out)


# --------------------------------------------------------------------------
# triangulation


def _triangulate_with_patches(spec, h, pts, patches, halfplane=None):
    ring_sets = []
    patch_blocks = []
    for patch in patches:
        c = np.asarray(patch.center, dtype=float)
        d = np.hypot(*(pts - c).T)
        pts = pts[d > patch.radius + 0.7 * h]
        rings = _patch_rings(patch, h)
        patch_blocks.append((c, rings))
    offset = len(pts)
    all_pts = [pts]
    for c, rings in patch_blocks:
        outer = rings[-1]
        ring_sets.append(np.arange(offset, offset + len(outer)))
        all_pts.append(outer)
        offset += len(outer)
    verts = np.vstack(all_pts)
    tri = Delaunay(verts).simplices.astype(np.int64)
    tri = _drop_degenerate(verts, tri)

    if spec.kind == "polygon":
        cen = verts[tri].mean(axis=1)
        tri = tri[_points_in_polygon(spec.polygon_vertices(), cen)]

    # discard the Delaunay fill inside each patch; its outer ring is convex
    for ring_ids in ring_sets:
        inside = np.isin(tri, ring_ids).all(axis=1)
        tri = tri[~inside]

    tris = [tri]
    verts_list = [verts]
    nv = len(verts)
    for (c, rings), ring_ids in zip(patch_blocks, ring_sets):
        inner = np.vstack([c[None, :]] + rings[:-1])
        base = nv
        nv += len(inner)
        verts_list.append(inner)
        ids = [np.array([base])]
        k = base + 1
        for ring in rings[:-1]:
            ids.append(np.arange(k, k + len(ring)))
            k += len(ring)
        ids.append(ring_ids)
        tris.append(_fan(ids[0][0], ids[1]))
        angles = [np.arctan2(r[:, 1] - c[1], r[:, 0] - c[0]) for r in rings]
        for j in range(len(rings) - 1):
            tris.append(_stitch(ids[j + 1], angles[j], ids[j + 2], angles[j + 1]))
    verts = np.vstack(verts_list)
    return verts, np.vstack(tris).astype(np.int64)


def _patch_rings(patch: GradedPatch, h: float) -> list[np.ndarray]:
    """Concentric rings of the patch, innermost first, outermost last."""
    c = np.asarray(patch.center, dtype=float)
    n_out = patch.n_outer
    if n_out % 8:
        raise MeshError("n_outer must be divisible by 8")
    rings = []
    radii, counts = [], []
    s = patch.core
    k = 1
    while 6 * k < n_out:
        radii.append(k * s)
        counts.append(6 * k)
        k += 1
    r = k * s
    q = 1.0 + (math.sqrt(3) / 2) * (2 * math.pi / n_out)
    while r < patch.radius:
        radii.append(r)
        counts.append(n_out)
        r *= q
    # outer ring spacing must not exceed h so the Delaunay stitch keeps its edges
    n_last = max(n_out, 8 * int(math.ceil(2 * math.pi * patch.radius / h / 8)))
    radii.append(patch.radius)
    counts.append(n_last)
    for i, (rad, m) in enumerate(zip(radii, counts)):
        # rings with the outer count alternate by half a step; the outermost is
        # aligned with the axes so mirrored patches coincide
        shift = 0.5 if (m == n_out and i % 2 and i != len(radii) - 1) else 0.0
        t = 2 * math.pi * (np.arange(m) + shift) / m
        rings.append(c + rad * np.column_stack([np.cos(t), np.sin(t)]))
    return rings


def _fan(center_id: int, ring_ids: np.ndarray) -> np.ndarray:
    nxt = np.roll(ring_ids, -1)
    return np.column_stack([np.full(len(ring_ids), center_id), ring_ids, nxt])


def _stitch(ids_a, ang_a, ids_b, ang_b) -> np.ndarray:
    """Triangulate the annulus between two closed rings by an angular merge."""
    ta = np.mod(ang_a, 2 * np.pi)
    tb = np.mod(ang_b, 2 * np.pi)
    oa, ob = np.argsort(ta), np.argsort(tb)
    ids_a, ta = np.asarray(ids_a)[oa], ta[oa]
    ids_b, tb = np.asarray(ids_b)[ob], tb[ob]
    na, nb = len(ids_a), len(ids_b)
    # unwrap so that the sequences continue one full turn
    ta_ext = np.concatenate([ta, ta[:1] + 2 * np.pi])
    tb_ext = np.concatenate([tb, tb[:1] + 2 * np.pi])
    # start both rings at the vertices with smallest angle
    i = j = 0
    out = []
    while i < na or j < nb:
        if i < na and (j >= nb or ta_ext[i + 1] <= tb_ext[j + 1]):
            out.append((ids_a[i % na], ids_a[(i + 1) % na], ids_b[j % nb]))
            i += 1
        else:
            out.append((ids_a[i % na], ids_b[(j + 1) % nb], ids_b[j % nb]))
            j += 1
    return np.array(out, dtype=np.int64)


def _point_reflect(verts, tris, c, n, h):
    mirrored = 2 * c - verts
    on_cut = np.abs((verts - c) @ n) < 1e-9 * max(1.0, h)
    nv = len(verts)
    idx = np.arange(nv) + nv
    # cut-line vertices map onto existing cut-line vertices
    cut_ids = np.flatnonzero(on_cut)
    if len(cut_ids):
        tree = cKDTree(verts[cut_ids])
        d, k = tree.query(mirrored[cut_ids])
        if d.max() > 1e-9:
            raise MeshError("cut line is not symmetric under the point reflection")
        idx[cut_ids] = cut_ids[k]
    new_ids = np.flatnonzero(~on_cut)
    remap = np.empty(nv, dtype=np.int64)
    remap[new_ids] = nv + np.arange(len(new_ids))
    remap[cut_ids] = idx[cut_ids]
    verts_all = np.vstack([verts, mirrored[new_ids]])
    tris_all = np.vstack([tris, remap[tris]])
    return verts_all, tris_all


def _drop_degenerate(verts, tri):
    a = _triangle_areas(verts, tri, signed=True)
    return tri[np.abs(a) > 1e-14 * (np.abs(a).max())]


def _orient(verts, tris):
    a = _triangle_areas(verts, tris, signed=True)
    tris = tris.copy()
    neg = a < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _boundary_flags(nv, tris):
    e = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    if counts.max() > 2:
        raise MeshError("non-manifold triangulation: an edge is shared by more than two triangles")
    flags = np.zeros(nv, dtype=bool)
    flags[uniq[counts == 1].ravel()] = True
    return flags


def _validate(mesh: Mesh) -> None:
    if mesh.n_vertices < 25:
        raise MeshError(f"mesh has only {mesh.n_vertices} vertices (need at least 25)")
    a = _triangle_areas(mesh.vertices, mesh.triangles, signed=True)
    if a.min() <= 0:
        raise MeshError("triangulation contains inverted or degenerate triangles")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise MeshError(f"{(~used).sum()} vertices are not attached to any triangle")
    bd = mesh.domain.boundary_distance(mesh.vertices[mesh.boundary])
    if np.abs(bd).max() > 1e-12:
        raise MeshError("boundary-flagged vertex off the domain boundary")
    if mesh.domain.kind != "disk":
        total = a.sum()
        if abs(total - mesh.domain.area) > 1e-10 * mesh.domain.area:
            raise MeshError(f"mesh area {total} differs from domain area {mesh.domain.area}")


# --------------------------------------------------------------------------
# small geometry helpers


def _triangle_areas(verts, tris, signed=False):
    p = verts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    a = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return a if signed else np.abs(a)


def _barycentric_hit(verts, tris, pt, tol=1e-12):
    p = verts[tris]
    v0 = p[:, 1] - p[:, 0]
    v1 = p[:, 2] - p[:, 0]
    w = pt - p[:, 0]
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (w[:, 0] * v1[:, 1] - w[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * w[:, 1] - v0[:, 1] * w[:, 0]) / det
    l0 = 1.0 - l1 - l2
    lam = np.column_stack([l0, l1, l2])
    ok = lam.min(axis=1) >= -tol
    if not ok.any():
        return None
    k = int(np.flatnonzero(ok)[np.argmax(lam[ok].min(axis=1))])
    return k, lam[k]


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return (orient(p1, p2, q1) * orient(p1, p2, q2) < 0
            and orient(q1, q2, p1) * orient(q1, q2, p2) < 0)


def _self_intersects(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                return True
    return False


def _points_in_polygon(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        cond = (a[1] > y) != (b[1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
        inside ^= cond & (x < xc)
    return inside


def _polygon_edge_distance(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    best = np.full(len(pts), np.inf)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        ab = b - a
        s = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
        q = a + s[:, None] * ab
        best = np.minimum(best, np.hypot(*(pts - q).T))
    return best
