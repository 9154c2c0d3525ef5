"""Triangular meshes of rectangular domains with circular/rectangular holes.

Vertices are 2D points, triangles are counterclockwise index triples, and
boundary edges carry integer markers (1 = outer boundary, 2, 3, ... = holes
in the order they were given).  Meshes are immutable after construction.

The generator lays out staggered rows of vertices (odd rows offset by half a
spacing, plus end vertices pinned to the domain sides) so that the bulk of
the triangulation is near-equilateral.  Holes are carved by snapping nearby
vertices onto the hole boundary and deleting the triangles that fall inside.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Circle",
    "Rect",
    "Mesh",
    "MeshQualityReport",
    "MeshError",
    "MeshFormatError",
    "MeshTopologyError",
    "GeometryError",
    "OrientationWarning",
    "load_mesh",
    "write_mesh",
    "generate_rect_mesh",
    "check_mesh_quality",
    "validate_mesh",
]


class MeshError(Exception):
    """Base class for mesh failures."""


class MeshFormatError(MeshError):
    """A mesh file could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MeshTopologyError(MeshError):
    """Connectivity is inconsistent (bad index, open boundary, ...)."""


class GeometryError(MeshError):
    """Generator input is infeasible (hole touches boundary, bad h, ...)."""


class OrientationWarning(UserWarning):
    """Issued when clockwise triangles are re-oriented on input."""


@dataclass(frozen=True)
class Circle:
    """Circular hole (or region) with center (cx, cy) and radius r."""

    cx: float
    cy: float
    r: float

    def contains(self, x, y, shrink=0.0):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 < (self.r - shrink) ** 2

    def boundary_distance(self, x, y):
        return np.abs(np.hypot(x - self.cx, y - self.cy) - self.r)

    def bbox(self):
        return (self.cx - self.r, self.cy - self.r, self.cx + self.r, self.cy + self.r)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangular hole (or region)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x, y, shrink=0.0):
        return (
            (x > self.x0 + shrink)
            & (x < self.x1 - shrink)
            & (y > self.y0 + shrink)
            & (y < self.y1 - shrink)
        )

    def boundary_distance(self, x, y):
        # distance to the boundary of the rectangle (inside or outside)
        qx = np.clip(x, self.x0, self.x1)
        qy = np.clip(y, self.y0, self.y1)
        outside = np.hypot(x - qx, y - qy)
        inner = np.minimum(
            np.minimum(x - self.x0, self.x1 - x), np.minimum(y - self.y0, self.y1 - y)
        )
        return np.where(outside > 0, outside, np.abs(inner))

    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with marked boundary edges.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    boundary_edges : (nb, 2) int array
    boundary_markers : (nb,) int array
    domain_area : float, sum of triangle areas
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    domain_area: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)


@dataclass(frozen=True)
class MeshQualityReport:
    """Geometric quality summary.

    ``is_strict_delaunay`` is true iff every interior edge has opposite
    angles summing to strictly less than pi (checked with a 1e-12 margin).
    ``worst_edge`` is the interior edge with the largest opposite-angle sum,
    or None when there are no interior edges.
    """

    is_strict_delaunay: bool
    min_angle: float
    worst_edge: tuple[int, int] | None
    max_opposite_angle_sum: float


def _freeze(mesh: Mesh) -> Mesh:
    for arr in (mesh.vertices, mesh.triangles, mesh.boundary_edges, mesh.boundary_markers):
        arr.setflags(write=False)
    return mesh


def _signed_areas(vertices, triangles):
    p1 = vertices[triangles[:, 0]]
    p2 = vertices[triangles[:, 1]]
    p3 = vertices[triangles[:, 2]]
    return 0.5 * (
        (p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
        - (p2[:, 1] - p1[:, 1]) * (p3[:, 0] - p1[:, 0])
    )


def _orient_ccw(vertices, triangles):
    """Flip clockwise triangles in place; returns the number of flips."""
    areas = _signed_areas(vertices, triangles)
    flipped = np.flatnonzero(areas < 0)
    if flipped.size:
        triangles[flipped, 1], triangles[flipped, 2] = (
            triangles[flipped, 2].copy(),
            triangles[flipped, 1].copy(),
        )
    return flipped.size


def _edge_incidence(triangles):
    """All undirected edges with incidence counts.

    Returns (edges (ne,2) sorted pairs, counts (ne,), inverse (3*nt,)) where
    inverse maps each local triangle edge to its row in ``edges``.
    """
    raw = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    raw_sorted = np.sort(raw, axis=1)
    edges, inverse, counts = np.unique(
        raw_sorted, axis=0, return_inverse=True, return_counts=True
    )
    return edges, counts, inverse


def validate_mesh(mesh: Mesh) -> None:
    """Raise MeshTopologyError unless all structural invariants hold."""
    nv = mesh.n_vertices
    tris = mesh.triangles
    if tris.size and (tris.min() < 0 or tris.max() >= nv):
        bad = np.flatnonzero((tris < 0).any(axis=1) | (tris >= nv).any(axis=1))[0]
        raise MeshTopologyError(
            f"triangle {bad} references vertex index out of range 0..{nv - 1}"
        )
    areas = _signed_areas(mesh.vertices, tris)
    if (areas <= 0).any():
        bad = int(np.argmin(areas))
        raise MeshTopologyError(f"triangle {bad} has nonpositive area {areas[bad]:g}")

    referenced = np.zeros(nv, dtype=bool)
    referenced[tris.ravel()] = True
    if not referenced.all():
        raise MeshTopologyError(
            f"vertex {int(np.flatnonzero(~referenced)[0])} is not used by any triangle"
        )

    edges, counts, _ = _edge_incidence(tris)
    if (counts > 2).any():
        e = edges[np.argmax(counts)]
        raise MeshTopologyError(f"edge ({e[0]},{e[1]}) is shared by more than 2 triangles")

    boundary = edges[counts == 1]
    listed = np.sort(np.asarray(mesh.boundary_edges), axis=1)
    if listed.shape[0] != boundary.shape[0]:
        raise MeshTopologyError(
            f"boundary edge list has {listed.shape[0]} entries, "
            f"mesh has {boundary.shape[0]} boundary edges"
        )
    if boundary.size:
        order_a = np.lexsort((boundary[:, 1], boundary[:, 0]))
        order_b = np.lexsort((listed[:, 1], listed[:, 0]))
        if not np.array_equal(boundary[order_a], listed[order_b]):
            raise MeshTopologyError("boundary edge list does not match mesh boundary")

    # boundary loops: every boundary vertex has degree exactly 2
    if boundary.size:
        degrees = np.bincount(boundary.ravel(), minlength=nv)
        bad = np.flatnonzero((degrees != 0) & (degrees != 2))
        if bad.size:
            raise MeshTopologyError(
                f"boundary is not a union of closed loops at vertex {int(bad[0])}"
            )
        n_loops = _count_boundary_loops(boundary)
        n_holes = n_loops - 1
        euler = nv - edges.shape[0] + tris.shape[0]
        if euler != 1 - n_holes:
            raise MeshTopologyError(
                f"Euler check failed: V-E+T={euler}, expected {1 - n_holes} "
                f"for {n_holes} hole(s)"
            )

    total = float(areas.sum())
    if not math.isclose(total, mesh.domain_area, rel_tol=1e-12, abs_tol=0.0):
        raise MeshTopologyError(
            f"domain_area {mesh.domain_area!r} != sum of triangle areas {total!r}"
        )


def _count_boundary_loops(boundary_edges):
    adj: dict[int, list[int]] = {}
    for a, b in boundary_edges:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    seen: set[int] = set()
    loops = 0
    for start in adj:
        if start in seen:
            continue
        loops += 1
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(w for w in adj[v] if w not in seen)
    return loops


# ---------------------------------------------------------------------------
# file I/O
#
# ASCII format: line 1 "nv nt nb"; nv lines "x y"; nt lines "i j k" (0-based);
# nb lines "i j marker".  Comments start with '#'.


def _data_lines(path):
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if body:
                yield line_no, body


def load_mesh(path) -> Mesh:
    """Read a mesh file, normalize orientation, and validate it."""
    lines = _data_lines(path)

    def next_line(what):
        try:
            return next(lines)
        except StopIteration:
            raise MeshFormatError(0, f"unexpected end of file while reading {what}")

    line_no, header = next_line("header")
    parts = header.split()
    if len(parts) != 3:
        raise MeshFormatError(line_no, "header must contain 'nv nt nb'")
    try:
        nv, nt, nb = (int(p) for p in parts)
    except ValueError:
        raise MeshFormatError(line_no, f"bad header {header!r}")
    if nv < 3 or nt < 1 or nb < 0:
        raise MeshFormatError(line_no, f"implausible sizes nv={nv} nt={nt} nb={nb}")

    vertices = np.empty((nv, 2), dtype=float)
    for i in range(nv):
        line_no, body = next_line(f"vertex {i}")
        parts = body.split()
        if len(parts) != 2:
            raise MeshFormatError(line_no, "vertex line must contain 'x y'")
        try:
            vertices[i, 0] = float(parts[0])
            vertices[i, 1] = float(parts[1])
        except ValueError:
            raise MeshFormatError(line_no, f"bad vertex coordinates {body!r}")

    triangles = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        line_no, body = next_line(f"triangle {i}")
        parts = body.split()
        if len(parts) != 3:
            raise MeshFormatError(line_no, "triangle line must contain 'i j k'")
        try:
            triangles[i] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(line_no, f"bad triangle indices {body!r}")

    boundary = np.empty((nb, 2), dtype=np.int64)
    markers = np.empty(nb, dtype=np.int64)
    for i in range(nb):
        line_no, body = next_line(f"boundary edge {i}")
        parts = body.split()
        if len(parts) != 3:
            raise MeshFormatError(line_no, "boundary line must contain 'i j marker'")
        try:
            boundary[i] = [int(parts[0]), int(parts[1])]
            markers[i] = int(parts[2])
        except ValueError:
            raise MeshFormatError(line_no, f"bad boundary edge {body!r}")

    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        bad = np.flatnonzero((triangles < 0).any(axis=1) | (triangles >= nv).any(axis=1))[0]
        raise MeshTopologyError(
            f"triangle {int(bad)} references vertex index out of range 0..{nv - 1}"
        )
    if boundary.size and (boundary.min() < 0 or boundary.max() >= nv):
        bad = np.flatnonzero((boundary < 0).any(axis=1) | (boundary >= nv).any(axis=1))[0]
        raise MeshTopologyError(
            f"boundary edge {int(bad)} references vertex index out of range 0..{nv - 1}"
        )

    n_flipped = _orient_ccw(vertices, triangles)
    if n_flipped:
        warnings.warn(
            f"re-oriented {n_flipped} clockwise triangle(s)", OrientationWarning
        )

    areas = _signed_areas(vertices, triangles)
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=boundary,
        boundary_markers=markers,
        domain_area=float(areas.sum()),
    )
    validate_mesh(mesh)
    return _freeze(mesh)


def write_mesh(mesh: Mesh, path) -> None:
    """Inverse serializer of load_mesh; floats use shortest round-trip form."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for (i, j), m in zip(mesh.boundary_edges, mesh.boundary_markers):
            fh.write(f"{i} {j} {m}\n")


# ---------------------------------------------------------------------------
# generation


def generate_rect_mesh(bounds, target_h, holes=()) -> Mesh:
    """Triangulate an axis-aligned rectangle minus the given holes.

    Parameters
    ----------
    bounds : (x0, y0, x1, y1)
    target_h : edge-length scale; the generator snaps it so rows fit exactly
    holes : iterable of Circle / Rect lying strictly inside the bounds

    The bulk pattern is staggered rows of near-equilateral triangles; holes
    are carved by snapping nearby vertices to the hole boundary and removing
    the triangles inside, which polygonalizes circular boundaries with
    roughly one segment per target_h of circumference.
    """
    x0, y0, x1, y1 = (float(b) for b in bounds)
    if not (x1 > x0 and y1 > y0):
        raise GeometryError(f"empty bounds {bounds}")
    width, height = x1 - x0, y1 - y0
    if not (0 < target_h <= min(width, height)):
        raise GeometryError(f"degenerate target_h {target_h} for bounds {bounds}")
    holes = tuple(holes)
    _check_hole_geometry((x0, y0, x1, y1), holes, target_h)

    nx = max(2, round(width / target_h))
    dx = width / nx
    ny = max(2, round(height / (dx * math.sqrt(3.0) / 2.0)))
    dy = height / ny

    rows = []
    verts = []
    for j in range(ny + 1):
        y = y0 + j * dy if j < ny else y1
        if j % 2 == 0:
            xs = np.linspace(x0, x1, nx + 1)
        else:
            xs = np.concatenate(([x0], x0 + (np.arange(nx) + 0.5) * dx, [x1]))
        idx = np.arange(len(verts), len(verts) + len(xs))
        verts.extend((x, y) for x in xs)
        rows.append(idx)
    vertices = np.asarray(verts, dtype=float)

    triangles = []
    for j in range(ny):
        triangles.extend(_strip(rows[j], rows[j + 1], vertices))
    triangles = np.asarray(triangles, dtype=np.int64)

    if holes:
        vertices, triangles = _carve_holes(vertices, triangles, (x0, y0, x1, y1), holes, dx)
        if triangles.shape[0] == 0:
            raise GeometryError("holes removed the entire domain")

    _orient_ccw(vertices, triangles)
    boundary, markers = _classify_boundary(vertices, triangles, (x0, y0, x1, y1), holes)
    areas = _signed_areas(vertices, triangles)
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=boundary,
        boundary_markers=markers,
        domain_area=float(areas.sum()),
    )
    validate_mesh(mesh)
    return _freeze(mesh)


def _check_hole_geometry(bounds, holes, target_h):
    x0, y0, x1, y1 = bounds
    clear = 0.75 * target_h
    for n, hole in enumerate(holes):
        hx0, hy0, hx1, hy1 = hole.bbox()
        if hx0 <= x0 + clear or hy0 <= y0 + clear or hx1 >= x1 - clear or hy1 >= y1 - clear:
            raise GeometryError(
                f"hole {n} touches or is too close to the outer boundary "
                f"(needs {clear:g} clearance at h={target_h:g})"
            )
        if isinstance(hole, Circle) and hole.r < 1.5 * target_h:
            raise GeometryError(
                f"hole {n} radius {hole.r:g} is below 1.5*target_h; refine target_h"
            )
        if isinstance(hole, Rect) and min(hole.x1 - hole.x0, hole.y1 - hole.y0) < 1.5 * target_h:
            raise GeometryError(f"hole {n} is thinner than 1.5*target_h; refine target_h")
    for n, a in enumerate(holes):
        for m, b in enumerate(holes[n + 1 :], start=n + 1):
            ax0, ay0, ax1, ay1 = a.bbox()
            bx0, by0, bx1, by1 = b.bbox()
            gap_x = max(bx0 - ax1, ax0 - bx1)
            gap_y = max(by0 - ay1, ay0 - by1)
            if max(gap_x, gap_y) < clear:
                raise GeometryError(f"holes {n} and {m} overlap or are too close")


def _strip(bottom, top, vertices):
    """Monotone triangulation between two x-sorted vertex rows."""
    tris = []
    i, j = 0, 0
    nb, nt = len(bottom) - 1, len(top) - 1
    while i < nb or j < nt:
        if i < nb and j < nt:
            d_bottom = np.hypot(*(vertices[bottom[i + 1]] - vertices[top[j]]))
            d_top = np.hypot(*(vertices[bottom[i]] - vertices[top[j + 1]]))
            advance_bottom = d_bottom <= d_top
        else:
            advance_bottom = i < nb
        if advance_bottom:
            tris.append((bottom[i], bottom[i + 1], top[j]))
            i += 1
        else:
            tris.append((bottom[i], top[j + 1], top[j]))
            j += 1
    return tris


def _snap_to_hole(vertices, sel, hole):
    if not sel.any():
        return
    vx, vy = vertices[:, 0], vertices[:, 1]
    if isinstance(hole, Circle):
        d = np.hypot(vx[sel] - hole.cx, vy[sel] - hole.cy)
        d = np.maximum(d, 1e-12 * hole.r)
        scale = hole.r / d
        vertices[sel, 0] = hole.cx + (vx[sel] - hole.cx) * scale
        vertices[sel, 1] = hole.cy + (vy[sel] - hole.cy) * scale
    else:
        nearest, _ = _nearest_on_rect(hole, vx, vy)
        vertices[sel] = nearest[sel]


def _carve_holes(vertices, triangles, bounds, holes, dx):
    """Snap vertices near hole boundaries onto them and drop inside triangles.

    Removal exposes loop vertices farther than the initial snap band, so the
    snap/carve pair iterates: every exposed non-outer vertex is pulled onto
    its nearest hole, then triangles whose centroid landed inside a hole (in
    particular chordal caps with all corners on a circle), triangles with a
    strictly interior vertex, and degenerate or inverted triangles are
    removed, until the boundary stabilizes.
    """
    x0, y0, x1, y1 = bounds
    vertices = vertices.copy()
    vx, vy = vertices[:, 0], vertices[:, 1]
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    on_outer = (
        (np.abs(vx - x0) <= tol)
        | (np.abs(vx - x1) <= tol)
        | (np.abs(vy - y0) <= tol)
        | (np.abs(vy - y1) <= tol)
    )
    snap_band = 0.45 * dx
    for hole in holes:
        dist = hole.boundary_distance(vertices[:, 0], vertices[:, 1])
        _snap_to_hole(vertices, (~on_outer) & (dist < snap_band), hole)

    for _ in range(20):
        vx, vy = vertices[:, 0], vertices[:, 1]
        keep = _signed_areas(vertices, triangles) > 1e-9 * dx * dx
        cent = vertices[triangles].mean(axis=1)
        for hole in holes:
            keep &= ~hole.contains(cent[:, 0], cent[:, 1])
            inside_v = hole.contains(vx, vy, shrink=1e-9 * dx)
            keep &= ~inside_v[triangles].any(axis=1)
        changed = not keep.all()
        triangles = triangles[keep]

        # exposed boundary vertices that sit on neither the outer rectangle
        # nor a hole boundary get pulled onto the nearest hole
        edges, counts, _ = _edge_incidence(triangles)
        loop_verts = np.unique(edges[counts == 1])
        hole_dists = np.stack(
            [hole.boundary_distance(vx[loop_verts], vy[loop_verts]) for hole in holes]
        )
        nearest_hole = np.argmin(hole_dists, axis=0)
        min_dist = hole_dists[nearest_hole, np.arange(len(loop_verts))]
        stray = (~on_outer[loop_verts]) & (min_dist > 1e-9 * dx)
        if not stray.any() and not changed:
            break
        if stray.any():
            if min_dist[stray].max() > 2.0 * dx:
                raise GeometryError(
                    "hole carving exposed a vertex far from every hole "
                    f"boundary ({min_dist[stray].max():.3g}); refine target_h"
                )
            for k, hole in enumerate(holes):
                sel = np.zeros(len(vertices), dtype=bool)
                sel[loop_verts[stray & (nearest_hole == k)]] = True
                _snap_to_hole(vertices, sel, hole)
    else:
        raise GeometryError("hole carving did not stabilize; refine target_h")

    referenced = np.zeros(len(vertices), dtype=bool)
    referenced[triangles.ravel()] = True
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[referenced] = np.arange(referenced.sum())
    return vertices[referenced], remap[triangles]


def _nearest_on_rect(rect, x, y):
    inside = rect.contains(x, y)
    qx = np.clip(x, rect.x0, rect.x1)
    qy = np.clip(y, rect.y0, rect.y1)
    # for interior points, push along the axis of least penetration
    dxl = x - rect.x0
    dxr = rect.x1 - x
    dyb = y - rect.y0
    dyt = rect.y1 - y
    stacked = np.stack([dxl, dxr, dyb, dyt])
    which = np.argmin(stacked, axis=0)
    ix = np.where(which == 0, rect.x0, np.where(which == 1, rect.x1, x))
    iy = np.where(which == 2, rect.y0, np.where(which == 3, rect.y1, y))
    nx = np.where(inside, ix, qx)
    ny = np.where(inside, iy, qy)
    dist = np.hypot(x - nx, y - ny)
    return np.stack([nx, ny], axis=1), dist


def _classify_boundary(vertices, triangles, bounds, holes):
    x0, y0, x1, y1 = bounds
    edges, counts, _ = _edge_incidence(triangles)
    boundary = edges[counts == 1]
    scale = max(x1 - x0, y1 - y0)
    tol = 1e-9 * scale
    vx, vy = vertices[:, 0], vertices[:, 1]
    on_outer = (
        (np.abs(vx - x0) <= tol)
        | (np.abs(vx - x1) <= tol)
        | (np.abs(vy - y0) <= tol)
        | (np.abs(vy - y1) <= tol)
    )
    on_hole = [hole.boundary_distance(vx, vy) <= 1e-6 * scale for hole in holes]

    markers = np.zeros(len(boundary), dtype=np.int64)
    for n, (a, b) in enumerate(boundary):
        if on_outer[a] and on_outer[b]:
            markers[n] = 1
            continue
        for k, mask in enumerate(on_hole):
            if mask[a] and mask[b]:
                markers[n] = k + 2
                break
        else:
            raise MeshTopologyError(
                f"boundary edge ({a},{b}) lies on neither the outer boundary nor a hole"
            )
    return boundary, markers


# ---------------------------------------------------------------------------
# quality


def check_mesh_quality(mesh: Mesh) -> MeshQualityReport:
    """Angle statistics and the strict-Delaunay interior-edge test."""
    verts = mesh.vertices
    tris = mesh.triangles
    angles = _triangle_angles(verts, tris)

    edges, counts, inverse = _edge_incidence(tris)
    # local edge e of a triangle is opposite local vertex (e+2)%3 given the
    # edge order [(0,1),(1,2),(2,0)]
    nt = tris.shape[0]
    opp_local = np.concatenate(
        [np.full(nt, 2), np.full(nt, 0), np.full(nt, 1)]
    )
    opp_angle = angles[np.tile(np.arange(nt), 3), opp_local]

    sums = np.zeros(len(edges))
    np.add.at(sums, inverse, opp_angle)
    interior = counts == 2
    if interior.any():
        worst = int(np.argmax(np.where(interior, sums, -np.inf)))
        max_sum = float(sums[worst])
        worst_edge = (int(edges[worst, 0]), int(edges[worst, 1]))
        strict = bool(max_sum < math.pi - 1e-12)
    else:
        max_sum = 0.0
        worst_edge = None
        strict = True

    return MeshQualityReport(
        is_strict_delaunay=strict,
        min_angle=float(angles.min()),
        worst_edge=worst_edge,
        max_opposite_angle_sum=max_sum,
    )


def _triangle_angles(vertices, triangles):
    p = vertices[triangles]  # (nt, 3, 2)
    angles = np.empty((triangles.shape[0], 3))
    for a in range(3):
        u = p[:, (a + 1) % 3] - p[:, a]
        v = p[:, (a + 2) % 3] - p[:, a]
        cosang = (u * v).sum(axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles[:, a] = np.arccos(np.clip(cosang, -1.0, 1.0))
    return angles
