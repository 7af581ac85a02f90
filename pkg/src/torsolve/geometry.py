"""Cross-section shapes, constant-element boundary meshes and interior collocation grids.

All shapes are placed with their twist centre / centroid at the origin.  The
boundary is always traversed counterclockwise so that the outward normal of a
boundary element with unit tangent ``(tx, ty)`` is ``(ty, -tx)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SHAPE_KINDS = ("rectangle", "equilateral_triangle", "circle", "ellipse", "polygon")

# vertex count used to approximate curved boundaries for distance queries
_CURVE_RESOLUTION = 4096


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SectionShape:
    """Parametric cross-section.

    ``rectangle`` takes ``b`` (width along x) and ``h`` (height along y),
    ``equilateral_triangle`` takes the side ``b`` (base parallel to x),
    ``circle`` takes ``radius``, ``ellipse`` the semi-axes ``a`` (x) and ``b`` (y),
    and ``polygon`` a counterclockwise list of vertices.
    """

    kind: str
    b: float = 0.0
    h: float = 0.0
    radius: float = 0.0
    a: float = 0.0
    vertices: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise GeometryError(f"unknown shape kind {self.kind!r}; expected one of {SHAPE_KINDS}")
        required = {
            "rectangle": ("b", "h"),
            "equilateral_triangle": ("b",),
            "circle": ("radius",),
            "ellipse": ("a", "b"),
            "polygon": (),
        }[self.kind]
        for name in required:
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise GeometryError(f"{self.kind}: {name} must be positive, got {value}")
        if self.kind == "polygon":
            _check_polygon(np.asarray(self.vertices, dtype=float))

    # constructors -----------------------------------------------------
    @classmethod
    def rectangle(cls, b: float, h: float) -> "SectionShape":
        return cls("rectangle", b=float(b), h=float(h))

    @classmethod
    def equilateral_triangle(cls, b: float) -> "SectionShape":
        return cls("equilateral_triangle", b=float(b))

    @classmethod
    def circle(cls, radius: float) -> "SectionShape":
        return cls("circle", radius=float(radius))

    @classmethod
    def ellipse(cls, a: float, b: float) -> "SectionShape":
        return cls("ellipse", a=float(a), b=float(b))

    @classmethod
    def polygon(cls, vertices) -> "SectionShape":
        verts = tuple((float(x), float(y)) for x, y in vertices)
        return cls("polygon", vertices=verts)

    # properties -------------------------------------------------------
    @property
    def is_curved(self) -> bool:
        return self.kind in ("circle", "ellipse")

    def corner_vertices(self) -> np.ndarray:
        """Vertices of polygonal shapes, counterclockwise, shape (n, 2)."""
        if self.kind == "rectangle":
            bx, hy = self.b / 2, self.h / 2
            return np.array([[-bx, -hy], [bx, -hy], [bx, hy], [-bx, hy]])
        if self.kind == "equilateral_triangle":
            s = self.b
            ybot = -s / (2 * np.sqrt(3.0))
            return np.array([[-s / 2, ybot], [s / 2, ybot], [0.0, s / np.sqrt(3.0)]])
        if self.kind == "polygon":
            return np.asarray(self.vertices, dtype=float)
        raise GeometryError(f"{self.kind} has no corner vertices")

    def area(self) -> float:
        if self.kind == "circle":
            return np.pi * self.radius**2
        if self.kind == "ellipse":
            return np.pi * self.a * self.b
        return _shoelace(self.corner_vertices())

    def bounding_box(self) -> tuple[float, float, float, float]:
        if self.kind == "circle":
            r = self.radius
            return -r, -r, r, r
        if self.kind == "ellipse":
            return -self.a, -self.b, self.a, self.b
        v = self.corner_vertices()
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()

    def height(self) -> float:
        """Extent along y; the grading direction of FGM sections."""
        _, ymin, _, ymax = self.bounding_box()
        return ymax - ymin

    def characteristic_length(self) -> float:
        xmin, ymin, xmax, ymax = self.bounding_box()
        return max(xmax - xmin, ymax - ymin)

    @cached_property
    def _outline(self) -> np.ndarray:
        if self.kind == "circle":
            t = np.linspace(0.0, 2 * np.pi, _CURVE_RESOLUTION, endpoint=False)
            return self.radius * np.column_stack([np.cos(t), np.sin(t)])
        if self.kind == "ellipse":
            t = np.linspace(0.0, 2 * np.pi, _CURVE_RESOLUTION, endpoint=False)
            return np.column_stack([self.a * np.cos(t), self.b * np.sin(t)])
        return self.corner_vertices()

    def boundary_distance(self, points) -> np.ndarray:
        """Unsigned distance from each point to the boundary curve."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "circle":
            return np.abs(self.radius - np.hypot(pts[:, 0], pts[:, 1]))
        return _polyline_distance(pts, self._outline)

    def contains(self, points) -> np.ndarray:
        """Vectorised strict-interior test; boundary points are outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        scale = self.characteristic_length()
        if self.kind == "circle":
            rho2 = (pts[:, 0] ** 2 + pts[:, 1] ** 2) / self.radius**2
            return rho2 < 1.0 - 1e-12
        if self.kind == "ellipse":
            rho2 = (pts[:, 0] / self.a) ** 2 + (pts[:, 1] / self.b) ** 2
            return rho2 < 1.0 - 1e-12
        inside = _ray_crossing(pts, self.corner_vertices())
        on_edge = _polyline_distance(pts, self.corner_vertices()) <= 1e-12 * scale
        return inside & ~on_edge


def point_in_domain(shape: SectionShape, point) -> bool:
    """True iff ``point`` lies strictly inside ``shape``."""
    return bool(shape.contains(np.asarray(point, dtype=float).reshape(1, 2))[0])


# ---------------------------------------------------------------------------
# boundary mesh


@dataclass(frozen=True)
class BoundaryMesh:
    """Straight constant elements; one node at each element midpoint."""

    start: np.ndarray
    end: np.ndarray

    @property
    def n(self) -> int:
        return len(self.start)

    @cached_property
    def length(self) -> np.ndarray:
        return np.hypot(*(self.end - self.start).T)

    @cached_property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.start + self.end)

    @cached_property
    def tangent(self) -> np.ndarray:
        return (self.end - self.start) / self.length[:, None]

    @cached_property
    def normal(self) -> np.ndarray:
        t = self.tangent
        return np.column_stack([t[:, 1], -t[:, 0]])

    @property
    def perimeter(self) -> float:
        return float(self.length.sum())

    def signed_area(self) -> float:
        """Area from the boundary circulation 1/2 * sum (x n_x + y n_y) ds."""
        m, nrm = self.midpoint, self.normal
        return 0.5 * float(np.sum(self.length * (m[:, 0] * nrm[:, 0] + m[:, 1] * nrm[:, 1])))

    def closure_defect(self) -> np.ndarray:
        return (self.length[:, None] * self.normal).sum(axis=0)


def discretize_boundary(shape: SectionShape, n: int) -> BoundaryMesh:
    """Split the boundary of ``shape`` into ``n`` straight constant elements.

    Polygon edges receive element counts proportional to their length (at
    least one each) so every corner is an element endpoint.  Curved shapes
    become inscribed ``n``-gons.
    """
    n = int(n)
    if n < 8:
        raise GeometryError(f"need at least 8 boundary elements, got {n}")
    if shape.is_curved:
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        if shape.kind == "circle":
            nodes = shape.radius * np.column_stack([np.cos(t), np.sin(t)])
        else:
            nodes = np.column_stack([shape.a * np.cos(t), shape.b * np.sin(t)])
        return BoundaryMesh(start=nodes, end=np.roll(nodes, -1, axis=0))

    verts = shape.corner_vertices()
    edges = np.roll(verts, -1, axis=0) - verts
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    bad = np.flatnonzero(lengths <= 1e-12 * max(lengths.max(), 1.0))
    if bad.size:
        i = int(bad[0])
        raise GeometryError(f"degenerate edge {i} from vertex {i} to vertex {(i + 1) % len(verts)}")
    if n < len(verts):
        raise GeometryError(f"{n} elements cannot cover {len(verts)} edges")
    counts = _apportion(lengths, n)
    starts, ends = [], []
    for v, e, m in zip(verts, edges, counts):
        s = np.arange(m) / m
        starts.append(v + s[:, None] * e)
        ends.append(v + (s + 1.0 / m)[:, None] * e)
    return BoundaryMesh(start=np.vstack(starts), end=np.vstack(ends))


def _apportion(lengths: np.ndarray, n: int) -> np.ndarray:
    """Largest-remainder split of ``n`` elements over edges, at least one each."""
    share = lengths / lengths.sum() * n
    counts = np.maximum(np.floor(share).astype(int), 1)
    while counts.sum() > n:
        i = np.argmax(np.where(counts > 1, counts - share, -np.inf))
        counts[i] -= 1
    while counts.sum() < n:
        counts[np.argmax(share - counts)] += 1
    return counts


# ---------------------------------------------------------------------------
# collocation points


@dataclass(frozen=True)
class CollocationSet:
    points: np.ndarray
    inset: float
    spacing: tuple[float, float]

    @property
    def m(self) -> int:
        return len(self.points)

    @cached_property
    def distances(self) -> np.ndarray:
        d = self.points[:, None, :] - self.points[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]


def generate_collocation(shape: SectionShape, m_target: int, inset: float) -> CollocationSet:
    """Cell-centred Cartesian grid clipped to the domain shrunk by ``inset``.

    The grid spacing is scanned over a fixed set of candidates and the point
    count closest to ``m_target`` wins, so results are deterministic.
    """
    if m_target < 1:
        raise GeometryError("m_target must be at least 1")
    if not inset > 0:
        raise GeometryError("inset must be positive")
    xmin, ymin, xmax, ymax = shape.bounding_box()
    wx, wy = xmax - xmin - 2 * inset, ymax - ymin - 2 * inset
    if wx <= 0 or wy <= 0:
        raise GeometryError(f"inset {inset} leaves no room inside the section")
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    base = np.sqrt(max(shape.area(), 1e-300) / m_target)

    best = None
    for scale in np.linspace(0.5, 2.0, 301):
        h = base * scale
        nx, ny = max(1, int(round(wx / h))), max(1, int(round(wy / h)))
        pts = _clipped_grid(shape, inset, cx, cy, wx, wy, nx, ny)
        err = abs(len(pts) - m_target)
        if len(pts) and (best is None or err < best[0]):
            best = (err, pts, (wx / nx, wy / ny))
        if err == 0:
            break
    if best is None:
        raise GeometryError(f"inset {inset} is too large: no collocation points fit")
    _, pts, spacing = best
    return CollocationSet(points=pts, inset=float(inset), spacing=spacing)


def _clipped_grid(shape, inset, cx, cy, wx, wy, nx, ny):
    xs = cx - wx / 2 + (np.arange(nx) + 0.5) * wx / nx
    ys = cy - wy / 2 + (np.arange(ny) + 0.5) * wy / ny
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    keep = shape.contains(pts)
    pts = pts[keep]
    if len(pts):
        pts = pts[shape.boundary_distance(pts) >= inset]
    return pts


# ---------------------------------------------------------------------------
# planar helpers


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _polyline_distance(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    a = verts
    d = np.roll(verts, -1, axis=0) - verts
    ll = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(pts))
    # chunk to bound memory for large point sets
    for lo in range(0, len(pts), 2048):
        p = pts[lo:lo + 2048]
        rel = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", rel, d) / ll, 0.0, 1.0)
        diff = rel - t[..., None] * d[None]
        out[lo:lo + 2048] = np.sqrt(np.min(np.einsum("pij,pij->pi", diff, diff), axis=1))
    return out


def _ray_crossing(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = verts[:, 0][None], verts[:, 1][None]
    x1, y1 = np.roll(verts[:, 0], -1)[None], np.roll(verts[:, 1], -1)[None]
    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    hits = straddle & (x < xcross)
    return (hits.sum(axis=1) % 2) == 1


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    return (orient(p1, p2, q1) != orient(p1, p2, q2)) and (orient(q1, q2, p1) != orient(q1, q2, p2))


def _check_polygon(v: np.ndarray) -> None:
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise GeometryError("polygon needs at least three (x, y) vertices")
    if not np.all(np.isfinite(v)):
        raise GeometryError("polygon vertices must be finite")
    n = len(v)
    for i in range(n):
        if np.allclose(v[i], v[(i + 1) % n], rtol=0, atol=1e-14):
            raise GeometryError(f"degenerate edge {i}: vertices {i} and {(i + 1) % n} coincide")
    if _shoelace(v) <= 0:
        raise GeometryError("polygon must be counterclockwise with positive area")
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                raise GeometryError(f"polygon self-intersects at edges {i} and {j}")
