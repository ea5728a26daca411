"""Polyhedral fragments: convex flat pieces of dimension 0, 1 or 2 in R^n.

Fragments are the off-grid currency of the lab.  Deformations, cone
constructions and ball clippings all produce pieces; grid faces convert
to pieces when they need to leave the lattice.  Measures of pieces are
exact (Gram determinants, shoelace); the intersection of a piece with a
round ball has an exact measure for dim <= 2 via circular-segment
decomposition, while the polytope geometry of such an intersection is
approximated by chords at a declared tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Piece",
    "segment",
    "point_piece",
    "polygon",
    "triangle",
    "clip_halfspace",
    "clip_box",
    "ball_clip_measure",
    "ball_clip_pieces",
    "disk_polygon_area",
    "circle_arcs_in_polygon",
    "simplex_measure",
]

_DEGENERATE = 1e-12


@dataclass(frozen=True)
class Piece:
    """A convex flat polytope fragment.

    dim 0: one vertex.  dim 1: two vertices.  dim 2: a planar convex
    polygon given by its vertex cycle.  Vertices are row vectors.
    """

    verts: np.ndarray
    dim: int
    host: object = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.verts, dtype=float)
        object.__setattr__(self, "verts", v)
        if v.ndim != 2:
            raise ValueError("verts must be a 2d array")
        if self.dim == 0 and len(v) != 1:
            raise ValueError("dim-0 piece needs exactly one vertex")
        if self.dim == 1 and len(v) != 2:
            raise ValueError("dim-1 piece needs exactly two vertices")
        if self.dim == 2 and len(v) < 3:
            raise ValueError("dim-2 piece needs at least three vertices")

    @property
    def n(self) -> int:
        return self.verts.shape[1]

    def measure(self) -> float:
        if self.dim == 0:
            return 0.0
        if self.dim == 1:
            return float(np.linalg.norm(self.verts[1] - self.verts[0]))
        return _polygon_area(self.verts)

    def centroid(self) -> np.ndarray:
        if self.dim == 2:
            # area-weighted centroid of the fan triangulation
            v0 = self.verts[0]
            tot, acc = 0.0, np.zeros(self.n)
            for i in range(1, len(self.verts) - 1):
                a = simplex_measure(np.array([v0, self.verts[i], self.verts[i + 1]]))
                tot += a
                acc += a * (v0 + self.verts[i] + self.verts[i + 1]) / 3.0
            if tot <= _DEGENERATE:
                return self.verts.mean(axis=0)
            return acc / tot
        return self.verts.mean(axis=0)

    def frame(self) -> np.ndarray:
        """Orthonormal basis (dim x n) of the tangent plane."""
        edges = self.verts[1:] - self.verts[0]
        if self.dim == 0 or len(edges) == 0:
            return np.zeros((0, self.n))
        q, r = np.linalg.qr(edges.T)
        keep = np.abs(np.diag(r)) > _DEGENERATE
        basis = q.T[: len(np.diag(r))][keep]
        return basis[: self.dim]

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.verts.min(axis=0), self.verts.max(axis=0)

    def translated(self, offset) -> "Piece":
        return Piece(self.verts + np.asarray(offset, dtype=float), self.dim, self.host)

    def mapped(self, fn) -> "Piece":
        """Apply a vertex-wise map; only valid when fn is affine on the piece."""
        return Piece(np.asarray([fn(v) for v in self.verts]), self.dim, self.host)

    def triangulate(self) -> list["Piece"]:
        if self.dim != 2 or len(self.verts) == 3:
            return [self]
        out = []
        for i in range(1, len(self.verts) - 1):
            out.append(Piece(self.verts[[0, i, i + 1]], 2, self.host))
        return out

    def sample_points(self, spacing: float) -> np.ndarray:
        """Vertices plus a supersampled interior lattice at the given spacing."""
        if self.dim == 0:
            return self.verts.copy()
        if self.dim == 1:
            a, b = self.verts
            k = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
            t = np.linspace(0.0, 1.0, k + 1)[:, None]
            return a + t * (b - a)
        pts = [self.verts]
        for tri in self.triangulate():
            a, b, c = tri.verts
            k = max(1, int(math.ceil(max(np.linalg.norm(b - a), np.linalg.norm(c - a)) / spacing)))
            for i in range(k + 1):
                for jj in range(k + 1 - i):
                    u, w = i / k, jj / k
                    pts.append((a + u * (b - a) + w * (c - a))[None, :])
        return np.vstack(pts)


def point_piece(p, host=None) -> Piece:
    return Piece(np.asarray([p], dtype=float), 0, host)


def point_segment_distance(q, a, b) -> float:
    q, a, b = (np.asarray(v, dtype=float) for v in (q, a, b))
    d = b - a
    dd = float(d @ d)
    if dd < _DEGENERATE:
        return float(np.linalg.norm(q - a))
    t = float(np.clip((q - a) @ d / dd, 0.0, 1.0))
    return float(np.linalg.norm(a + t * d - q))


def point_triangle_distance(q, a, b, c) -> float:
    q, a, b, c = (np.asarray(v, dtype=float) for v in (q, a, b, c))
    ab, ac, aq = b - a, c - a, q - a
    g = np.array([[ab @ ab, ab @ ac], [ac @ ab, ac @ ac]])
    rhs = np.array([ab @ aq, ac @ aq])
    det = np.linalg.det(g)
    if abs(det) > _DEGENERATE:
        u, v = np.linalg.solve(g, rhs)
        if u >= 0 and v >= 0 and u + v <= 1:
            return float(np.linalg.norm(a + u * ab + v * ac - q))
    return min(point_segment_distance(q, a, b),
               point_segment_distance(q, b, c),
               point_segment_distance(q, c, a))


def point_to_piece_distance(q, piece: "Piece") -> float:
    if piece.dim == 0:
        return float(np.linalg.norm(piece.verts[0] - np.asarray(q, dtype=float)))
    if piece.dim == 1:
        return point_segment_distance(q, piece.verts[0], piece.verts[1])
    best = math.inf
    for tri in piece.triangulate():
        best = min(best, point_triangle_distance(q, *tri.verts))
    return best


def segment(a, b, host=None) -> Piece:
    return Piece(np.asarray([a, b], dtype=float), 1, host)


def triangle(a, b, c, host=None) -> Piece:
    return Piece(np.asarray([a, b, c], dtype=float), 2, host)


def polygon(verts, host=None) -> Piece:
    return Piece(np.asarray(verts, dtype=float), 2, host)


def simplex_measure(verts: np.ndarray) -> float:
    """d-volume of the simplex spanned by d+1 vertex rows (Gram determinant)."""
    verts = np.asarray(verts, dtype=float)
    d = len(verts) - 1
    if d == 0:
        return 0.0
    e = verts[1:] - verts[0]
    g = e @ e.T
    det = np.linalg.det(g)
    if det <= 0:
        return 0.0
    return math.sqrt(det) / math.factorial(d)


def _polygon_area(verts: np.ndarray) -> float:
    v0 = verts[0]
    acc = 0.0
    for i in range(1, len(verts) - 1):
        acc += simplex_measure(np.array([v0, verts[i], verts[i + 1]]))
    return acc


def clip_halfspace(piece: Piece, normal, offset: float, set_coord: int | None = None,
                   set_value: float | None = None) -> tuple[Piece | None, Piece | None]:
    """Split a piece by the halfspace normal . x <= offset.

    Returns (inside, outside); either may be None.  When the plane is a
    coordinate plane, pass set_coord/set_value so newly created vertices
    carry the plane coordinate exactly.
    """
    normal = np.asarray(normal, dtype=float)
    vals = piece.verts @ normal - offset
    tol = _DEGENERATE * max(1.0, float(np.abs(piece.verts).max()))

    if np.all(vals <= tol):
        return piece, None
    if np.all(vals >= -tol):
        return None, piece

    def cut(a, b, va, vb):
        t = va / (va - vb)
        p = a + t * (b - a)
        if set_coord is not None:
            p = p.copy()
            p[set_coord] = set_value
        return p

    if piece.dim == 1:
        (a, b), (va, vb) = piece.verts, vals
        mid = cut(a, b, va, vb)
        lo = Piece(np.array([a, mid]) if va < 0 else np.array([mid, b]), 1, piece.host)
        hi = Piece(np.array([mid, b]) if va < 0 else np.array([a, mid]), 1, piece.host)
        return lo, hi

    # dim 2: Sutherland-Hodgman, both sides in one pass
    inside, outside = [], []
    k = len(piece.verts)
    for i in range(k):
        a, va = piece.verts[i], vals[i]
        b, vb = piece.verts[(i + 1) % k], vals[(i + 1) % k]
        (inside if va <= tol else outside).append(a)
        if (va < -tol and vb > tol) or (va > tol and vb < -tol):
            m = cut(a, b, va, vb)
            inside.append(m)
            outside.append(m)
        elif abs(va) <= tol:
            outside.append(a)
    lo = Piece(np.asarray(inside), 2, piece.host) if len(inside) >= 3 else None
    hi = Piece(np.asarray(outside), 2, piece.host) if len(outside) >= 3 else None
    if lo is not None and lo.measure() <= _DEGENERATE:
        lo = None
    if hi is not None and hi.measure() <= _DEGENERATE:
        hi = None
    return lo, hi


def clip_box(piece: Piece, lo, hi) -> Piece | None:
    """The part of a piece inside an axis box (closed)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    cur = piece
    for i in range(piece.n):
        e = np.zeros(piece.n)
        e[i] = 1.0
        cur, _ = clip_halfspace(cur, e, hi[i], set_coord=i, set_value=hi[i])
        if cur is None:
            return None
        cur, _ = clip_halfspace(cur, -e, -lo[i], set_coord=i, set_value=lo[i])
        if cur is None:
            return None
    return cur


# ---------------------------------------------------------------------------
# exact disk / polygon intersection in the plane
# ---------------------------------------------------------------------------

def _tri_disk_area(r: float, a: np.ndarray, b: np.ndarray) -> float:
    """Signed area of triangle(origin, a, b) intersected with the disk of
    radius r about the origin.  Sign follows the orientation of (a, b).
    """
    cross = a[0] * b[1] - a[1] * b[0]
    if abs(cross) < _DEGENERATE * max(1.0, r * r):
        return 0.0
    sign = 1.0 if cross > 0 else -1.0
    if sign < 0:
        a, b = b, a
    ra, rb = np.hypot(*a), np.hypot(*b)

    def sector(u, v):
        ang = math.atan2(u[0] * v[1] - u[1] * v[0], float(u @ v))
        return 0.5 * r * r * ang

    def tri(u, v):
        return 0.5 * (u[0] * v[1] - u[1] * v[0])

    d = b - a
    dd = float(d @ d)
    # points on segment at distance r from origin: |a + t d| = r
    t_hits = []
    if dd > _DEGENERATE:
        pa = float(a @ d)
        disc = pa * pa - dd * (float(a @ a) - r * r)
        if disc > 0:
            sq = math.sqrt(disc)
            for t in ((-pa - sq) / dd, (-pa + sq) / dd):
                if 1e-12 < t < 1 - 1e-12:
                    t_hits.append(t)
    t_hits.sort()

    pts = [a] + [a + t * d for t in t_hits] + [b]
    area = 0.0
    for u, v in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (u + v)
        if np.hypot(*mid) <= r:
            area += tri(u, v)
        else:
            area += sector(u, v)
    if ra > r and rb > r and not t_hits:
        # segment entirely outside: pure sector already handled above
        pass
    return sign * area


def disk_polygon_area(verts2d: np.ndarray, center, r: float) -> float:
    """Exact area of polygon \\cap disk for a simple polygon (2d verts)."""
    c = np.asarray(center, dtype=float)
    v = np.asarray(verts2d, dtype=float) - c
    total = 0.0
    k = len(v)
    for i in range(k):
        total += _tri_disk_area(r, v[i], v[(i + 1) % k])
    return abs(total)


def circle_arcs_in_polygon(verts2d: np.ndarray, center, r: float) -> list[tuple[float, float]]:
    """Angular intervals of the circle of radius r about center lying inside
    the polygon (simple, any orientation).  Intervals are in radians.
    """
    c = np.asarray(center, dtype=float)
    v = np.asarray(verts2d, dtype=float)
    k = len(v)
    crit = [0.0]
    for i in range(k):
        a, b = v[i] - c, v[(i + 1) % k] - c
        d = b - a
        dd = float(d @ d)
        if dd < _DEGENERATE:
            continue
        pa = float(a @ d)
        disc = pa * pa - dd * (float(a @ a) - r * r)
        if disc <= 0:
            continue
        sq = math.sqrt(disc)
        for t in ((-pa - sq) / dd, (-pa + sq) / dd):
            if -1e-12 <= t <= 1 + 1e-12:
                p = a + t * d
                crit.append(math.atan2(p[1], p[0]))
    crit = sorted(set(th % (2 * math.pi) for th in crit))
    crit.append(crit[0] + 2 * math.pi)
    arcs = []
    for th0, th1 in zip(crit[:-1], crit[1:]):
        if th1 - th0 < 1e-12:
            continue
        mid = 0.5 * (th0 + th1)
        p = c + r * np.array([math.cos(mid), math.sin(mid)])
        if _point_in_polygon(p, v):
            arcs.append((th0, th1))
    return arcs


def _point_in_polygon(p, verts) -> bool:
    x, y = p
    inside = False
    k = len(verts)
    for i in range(k):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % k]
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) / (y1 - y0) * (x1 - x0)
            if x < xc:
                inside = not inside
    return inside


# ---------------------------------------------------------------------------
# ball clipping
# ---------------------------------------------------------------------------

def _plane_chart(piece: Piece):
    """(origin, basis) of the piece's plane plus 2d coords of its verts."""
    o = piece.verts[0]
    basis = piece.frame()
    coords = (piece.verts - o) @ basis.T
    return o, basis, coords


def ball_clip_measure(piece: Piece, p, r: float) -> tuple[float, float]:
    """(H^d(piece inside B(p,r)), H^{d-1}(piece on the sphere)).

    Exact for dim 0, 1 and 2.  For dim 0 the first entry is 0 and the
    second is unused; for dim 1 the slice measure is the crossing count
    (H^0); for dim 2 it is the arc length of the sphere trace.
    """
    p = np.asarray(p, dtype=float)
    if piece.dim == 0:
        return 0.0, 0.0
    if piece.dim == 1:
        a, b = piece.verts
        d = b - a
        dd = float(d @ d)
        if dd < _DEGENERATE:
            return 0.0, 0.0
        pa = float((a - p) @ d)
        c0 = float((a - p) @ (a - p)) - r * r
        disc = pa * pa - dd * c0
        if disc <= 0:
            return (0.0, 0.0) if c0 > 0 else (math.sqrt(dd), 0.0)
        sq = math.sqrt(disc)
        t0, t1 = (-pa - sq) / dd, (-pa + sq) / dd
        lo, hi = max(t0, 0.0), min(t1, 1.0)
        inside = max(0.0, hi - lo) * math.sqrt(dd)
        crossings = sum(1 for t in (t0, t1) if 0.0 <= t <= 1.0)
        return inside, float(crossings)

    o, basis, coords = _plane_chart(piece)
    rel = p - o
    in_plane = rel @ basis.T
    d_perp2 = float(rel @ rel) - float(in_plane @ in_plane)
    if d_perp2 >= r * r - _DEGENERATE:
        return 0.0, 0.0
    r2 = math.sqrt(max(r * r - d_perp2, 0.0))
    area = disk_polygon_area(coords, in_plane, r2)
    arcs = circle_arcs_in_polygon(coords, in_plane, r2)
    arclen = r2 * sum(t1 - t0 for t0, t1 in arcs)
    return area, arclen


def ball_clip_pieces(piece: Piece, p, r: float, arc_segments: int = 64
                     ) -> tuple[list[Piece], list[Piece], list[Piece]]:
    """(inside, outside, slice) pieces of piece against B(p,r).

    The round boundary is approximated by chords; arc_segments controls
    the angular resolution of the approximation (the clipping tolerance
    on volumes scales like arc_segments**-2).  Slice pieces have one
    dimension less than the input.
    """
    p = np.asarray(p, dtype=float)
    if piece.dim == 0:
        inside = float(np.linalg.norm(piece.verts[0] - p)) <= r
        return ([piece], [], []) if inside else ([], [piece], [])
    if piece.dim == 1:
        a, b = piece.verts
        d = b - a
        dd = float(d @ d)
        pa = float((a - p) @ d)
        c0 = float((a - p) @ (a - p)) - r * r
        disc = pa * pa - dd * c0
        if disc <= 0 or dd < _DEGENERATE:
            if c0 > 0:
                return [], [piece], []
            return [piece], [], []
        sq = math.sqrt(disc)
        t0, t1 = (-pa - sq) / dd, (-pa + sq) / dd
        cuts = sorted({0.0, 1.0, min(max(t0, 0.0), 1.0), min(max(t1, 0.0), 1.0)})
        inside, outside, slc = [], [], []
        for u0, u1 in zip(cuts[:-1], cuts[1:]):
            if u1 - u0 < 1e-12:
                continue
            seg = Piece(np.array([a + u0 * d, a + u1 * d]), 1, piece.host)
            mid = a + 0.5 * (u0 + u1) * d
            (inside if np.linalg.norm(mid - p) <= r else outside).append(seg)
        for t in (t0, t1):
            if 0.0 <= t <= 1.0:
                slc.append(point_piece(a + t * d, piece.host))
        return inside, outside, slc

    o, basis, coords = _plane_chart(piece)
    rel = p - o
    in_plane = rel @ basis.T
    d_perp2 = float(rel @ rel) - float(in_plane @ in_plane)
    if d_perp2 >= r * r:
        return [], [piece], []
    r2 = math.sqrt(r * r - d_perp2)

    def lift(q2):
        return o + q2 @ basis

    # clip the polygon by the inscribed arc_segments-gon of the in-plane disk
    inside_poly = Piece(coords, 2)
    outs = []
    for i in range(arc_segments):
        th = 2 * math.pi * (i + 0.5) / arc_segments
        nrm = np.array([math.cos(th), math.sin(th)])
        off = float(nrm @ in_plane) + r2 * math.cos(math.pi / arc_segments)
        if inside_poly is None:
            break
        inside_poly, out = clip_halfspace(inside_poly, nrm, off)
        if out is not None:
            outs.append(out)
    inside = []
    if inside_poly is not None and inside_poly.measure() > _DEGENERATE:
        inside.append(Piece(np.asarray([lift(v) for v in inside_poly.verts]), 2, piece.host))
    outside = [Piece(np.asarray([lift(v) for v in o2.verts]), 2, piece.host) for o2 in outs]

    slc = []
    for th0, th1 in circle_arcs_in_polygon(coords, in_plane, r2):
        steps = max(1, int(math.ceil((th1 - th0) / (2 * math.pi / arc_segments))))
        for s in range(steps):
            a0 = th0 + (th1 - th0) * s / steps
            a1 = th0 + (th1 - th0) * (s + 1) / steps
            q0 = in_plane + r2 * np.array([math.cos(a0), math.sin(a0)])
            q1 = in_plane + r2 * np.array([math.cos(a1), math.sin(a1)])
            slc.append(Piece(np.array([lift(q0), lift(q1)]), 1, piece.host))
    return inside, outside, slc
