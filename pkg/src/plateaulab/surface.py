"""Cubical surfaces: grid faces plus polyhedral fragments, with measures.

A surface is the competitor object of the lab: a pure m-dimensional set
made of exact lattice faces and/or off-grid convex pieces, together with
a distinguished bounding set A that deformations must fix.  Measures
count overlapping mass once; partially overlapping coplanar fragments
are resolved by an exact 2d boolean union instead of double counting.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .fragments import Piece, ball_clip_measure, ball_clip_pieces, point_piece
from .grid import Face, GridError

__all__ = [
    "CubicalSurface",
    "BallRestriction",
    "hausdorff_measure",
    "hausdorff_distance",
    "restrict_ball",
    "reduce_surface",
    "face_to_piece",
    "read_faces",
    "write_faces",
    "export_obj",
]

_DEGENERATE = 1e-12


def face_to_piece(face: Face) -> Piece:
    """A face as a geometric piece (dim <= 2 only)."""
    lo = face.min_corner()
    s = face.side
    if face.dim == 0:
        return point_piece(lo, host=face)
    if face.dim == 1:
        hi = lo.copy()
        hi[face.axes[0]] += s
        return Piece(np.array([lo, hi]), 1, host=face)
    if face.dim == 2:
        a0, a1 = face.axes
        v = [lo.copy() for _ in range(4)]
        v[1][a0] += s
        v[2][a0] += s
        v[2][a1] += s
        v[3][a1] += s
        return Piece(np.asarray(v), 2, host=face)
    raise GridError(f"no geometric piece for a {face.dim}-face")


@dataclass(frozen=True)
class CubicalSurface:
    """A competitor surface X with bounding set A.

    ``faces`` and ``pieces`` make up the surface part X \\ A; the
    bounding set is stored separately in ``a_faces`` / ``a_pieces`` and
    is understood to be contained in X as a point set.
    """

    m: int
    n: int
    faces: frozenset[Face] = frozenset()
    pieces: tuple[Piece, ...] = ()
    a_faces: frozenset[Face] = frozenset()
    a_pieces: tuple[Piece, ...] = ()

    def __post_init__(self):
        if self.m < 1 or self.m > self.n:
            raise GridError(f"surface dimension m={self.m} out of range for n={self.n}")
        for f in self.faces:
            if f.n != self.n:
                raise GridError("face ambient dimension mismatch")
        for p in self.pieces:
            if p.n != self.n:
                raise GridError("piece ambient dimension mismatch")

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_faces(cls, m, n, faces, a_faces=(), pieces=(), a_pieces=()):
        return cls(m, n, frozenset(faces), tuple(pieces),
                   frozenset(a_faces), tuple(a_pieces))

    def with_surface(self, faces=None, pieces=None) -> "CubicalSurface":
        return replace(
            self,
            faces=frozenset(faces) if faces is not None else self.faces,
            pieces=tuple(pieces) if pieces is not None else self.pieces,
        )

    # -- views ---------------------------------------------------------------

    def surface_pieces(self) -> list[Piece]:
        """All surface-part geometry as pieces (faces converted)."""
        out = [face_to_piece(f) for f in sorted(self.faces)]
        out.extend(self.pieces)
        return out

    def all_pieces(self) -> list[Piece]:
        out = self.surface_pieces()
        out.extend(face_to_piece(f) for f in sorted(self.a_faces))
        out.extend(self.a_pieces)
        return out

    def is_pure(self) -> bool:
        return all(f.dim == self.m for f in self.faces) and all(
            p.dim == self.m for p in self.pieces)

    def measure(self) -> float:
        """H^m of the surface part, overlaps counted once.

        Content of dimension below m carries no H^m mass and is ignored.
        """
        items = [p for p in self.surface_pieces() if p.dim == self.m]
        return hausdorff_measure(items, self.m)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        los, his = [], []
        for p in self.all_pieces():
            lo, hi = p.bbox()
            los.append(lo)
            his.append(hi)
        if not los:
            z = np.zeros(self.n)
            return z, z
        return np.min(los, axis=0), np.max(his, axis=0)

    def sample_points(self, spacing: float, include_bounding: bool = True) -> np.ndarray:
        pieces = self.all_pieces() if include_bounding else self.surface_pieces()
        if not pieces:
            return np.zeros((0, self.n))
        return np.vstack([p.sample_points(spacing) for p in pieces])


# ---------------------------------------------------------------------------
# measure with overlap resolution
# ---------------------------------------------------------------------------

def _resolve_faces(faces: list[Face], d: int) -> float:
    """Sum of d-measures of faces, exact dedup across levels."""
    if not faces:
        return 0.0
    for f in faces:
        if f.dim != d:
            raise GridError(f"mixed-dimension input: expected {d}-faces, got a {f.dim}-face")
    levels = {f.level for f in faces}
    if len(levels) == 1:
        return len(set(faces)) * faces[0].measure(d)
    top = max(levels)
    refined: set[Face] = set()
    for f in faces:
        refined.update(f.at_level(top))
    return len(refined) * 2.0 ** (-top * d)


def _plane_key(piece: Piece, scale: float):
    """Hashable key identifying the affine span of a piece, up to tolerance."""
    c = piece.centroid()
    if piece.dim == 1:
        d = piece.verts[1] - piece.verts[0]
        nd = np.linalg.norm(d)
        if nd < _DEGENERATE:
            return None
        u = d / nd
        if tuple(u) < tuple(-u):
            u = -u
        off = c - (c @ u) * u
        return ("L",) + tuple(np.round(u, 9)) + tuple(np.round(off / max(scale, 1), 9))
    basis = piece.frame()
    if len(basis) < 2:
        return None
    # normal description: projector onto the orthogonal complement
    proj = np.eye(piece.n) - basis.T @ basis
    off = proj @ c
    return ("P",) + tuple(np.round(proj.ravel(), 9)) + tuple(np.round(off / max(scale, 1), 9))


def _union_measure_line(pieces: list[Piece]) -> float:
    """Length of a union of collinear segments."""
    d = pieces[0].verts[1] - pieces[0].verts[0]
    u = d / np.linalg.norm(d)
    ivs = []
    for p in pieces:
        t0, t1 = float(p.verts[0] @ u), float(p.verts[1] @ u)
        ivs.append((min(t0, t1), max(t0, t1)))
    ivs.sort()
    total, cur_lo, cur_hi = 0.0, *ivs[0]
    for lo, hi in ivs[1:]:
        if lo > cur_hi:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    return total + (cur_hi - cur_lo)


def _union_measure_plane(pieces: list[Piece]) -> float:
    """Area of a union of coplanar polygons via an exact 2d boolean union."""
    from shapely.geometry import Polygon
    from shapely.ops import unary_union

    basis = None
    for p in pieces:
        basis = p.frame()
        if len(basis) == 2:
            break
    if basis is None or len(basis) < 2:
        return 0.0
    o = pieces[0].verts[0]
    polys = []
    for p in pieces:
        coords = (p.verts - o) @ basis.T
        poly = Polygon(coords)
        if not poly.is_valid:
            poly = poly.buffer(0)
        polys.append(poly)
    return float(unary_union(polys).area)


def _bboxes_disjoint(pieces: list[Piece]) -> bool:
    boxes = [p.bbox() for p in pieces]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            lo = np.maximum(boxes[i][0], boxes[j][0])
            hi = np.minimum(boxes[i][1], boxes[j][1])
            if np.all(lo <= hi + 1e-12):
                return False
    return True


def hausdorff_measure(items, d: int) -> float:
    """H^d of a finite set of faces and/or pieces, overlaps counted once.

    Faces at the same dyadic address are deduplicated exactly; coplanar
    fragments with intersecting bounding boxes go through an exact union
    (interval union for d=1, polygon union for d=2).
    """
    faces, pieces = [], []
    for it in items:
        if isinstance(it, Face):
            faces.append(it)
        elif isinstance(it, Piece):
            pieces.append(it)
        else:
            raise TypeError(f"cannot measure {type(it)!r}")
    for p in pieces:
        if p.dim != d:
            raise GridError(f"mixed-dimension input: expected dim {d}, got {p.dim}")
    total = _resolve_faces(faces, d) if faces else 0.0
    if not pieces:
        return total
    if faces:
        # mixed representation: push faces through the same union machinery
        pieces = pieces + [face_to_piece(f) for f in set(faces)]
        total = 0.0
    scale = max(float(np.abs(p.verts).max()) for p in pieces)
    groups: dict = {}
    loose = 0.0
    for p in pieces:
        if p.measure() <= _DEGENERATE:
            continue
        key = _plane_key(p, scale)
        if key is None:
            loose += p.measure()
        else:
            groups.setdefault(key, []).append(p)
    for key, grp in groups.items():
        if len(grp) == 1 or _bboxes_disjoint(grp):
            loose += sum(p.measure() for p in grp)
        elif d == 1:
            loose += _union_measure_line(grp)
        elif d == 2:
            loose += _union_measure_plane(grp)
        else:
            loose += sum(p.measure() for p in grp)
    return total + loose


# ---------------------------------------------------------------------------
# Hausdorff distance
# ---------------------------------------------------------------------------

def _as_points(obj, spacing: float) -> np.ndarray:
    if isinstance(obj, CubicalSurface):
        return obj.sample_points(spacing)
    if isinstance(obj, Piece):
        return obj.sample_points(spacing)
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def hausdorff_distance(x, y, spacing: float = 0.05) -> float:
    """Hausdorff distance between two non-empty sampled sets.

    Sets may be point arrays, pieces or surfaces; surfaces are sampled at
    the given spacing, so the answer carries an error of at most
    spacing / 2 in each directed term.
    """
    px, py = _as_points(x, spacing), _as_points(y, spacing)
    if len(px) == 0 or len(py) == 0:
        raise GridError("hausdorff_distance requires non-empty sets")
    tx, ty = cKDTree(px), cKDTree(py)
    d_xy = ty.query(px)[0].max()
    d_yx = tx.query(py)[0].max()
    return float(max(d_xy, d_yx))


# ---------------------------------------------------------------------------
# ball restriction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallRestriction:
    """X clipped to a closed ball: interior part and sphere slice."""

    center: np.ndarray
    radius: float
    inside: tuple[Piece, ...]
    outside: tuple[Piece, ...]
    slice_pieces: tuple[Piece, ...]
    inside_measure: float
    slice_measure: float
    surface_dim: int = field(default=0, compare=False)

    def interior_measure(self) -> float:
        return self.inside_measure


def restrict_ball(x, p, r: float, arc_segments: int = 64) -> BallRestriction:
    """Clip a surface (or piece list) to B(p,r).

    Measures of the interior part and the sphere slice are exact for
    pieces of dimension <= 2; the returned polytope fragments use a chord
    approximation of the sphere at the given angular resolution.
    """
    if r <= 0:
        raise GridError("ball radius must be positive")
    p = np.asarray(p, dtype=float)
    if isinstance(x, CubicalSurface):
        pieces = x.surface_pieces()
        dim = x.m
    else:
        pieces = list(x)
        dim = pieces[0].dim if pieces else 0
    ins, outs, slcs = [], [], []
    m_in = 0.0
    m_sl = 0.0
    for piece in pieces:
        lo, hi = piece.bbox()
        gap = np.maximum(lo - p, np.maximum(p - hi, 0.0))
        if float(gap @ gap) > r * r:
            outs.append(piece)
            continue
        mi, ms = ball_clip_measure(piece, p, r)
        m_in += mi
        m_sl += ms
        i3, o3, s3 = ball_clip_pieces(piece, p, r, arc_segments)
        ins.extend(i3)
        outs.extend(o3)
        slcs.extend(s3)
    return BallRestriction(p, float(r), tuple(ins), tuple(outs), tuple(slcs),
                           m_in, m_sl, dim)


# ---------------------------------------------------------------------------
# reduction
# ---------------------------------------------------------------------------

def reduce_surface(x: CubicalSurface) -> CubicalSurface:
    """The reduced surface X-dagger: drop everything in X \\ A carrying no
    m-dimensional mass (wrong-dimension faces, degenerate fragments).
    Idempotent, and measure preserving on the m-dimensional part.
    """
    faces = frozenset(f for f in x.faces if f.dim == x.m and f.measure(x.m) > 0.0)
    pieces = tuple(p for p in x.pieces if p.dim == x.m and p.measure() > _DEGENERATE)
    return replace(x, faces=faces, pieces=pieces)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_faces(faces, stream=None) -> str:
    """Line format: ``level  anchor...  axes`` with axes comma-joined or '-'."""
    out = stream or io.StringIO()
    for f in sorted(faces):
        axes = ",".join(str(a) for a in f.axes) if f.axes else "-"
        anchor = " ".join(str(a) for a in f.anchor)
        out.write(f"{f.level} {anchor} {axes}\n")
    return out.getvalue() if stream is None else ""


def read_faces(text: str) -> list[Face]:
    faces = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        level = int(parts[0])
        axes = () if parts[-1] == "-" else tuple(sorted(int(a) for a in parts[-1].split(",")))
        anchor = tuple(int(a) for a in parts[1:-1])
        faces.append(Face(level, anchor, axes))
    return faces


def export_obj(x: CubicalSurface, stream) -> None:
    """Wavefront OBJ export with a deterministic fan triangulation."""
    verts: list[tuple] = []
    vert_index: dict[tuple, int] = {}

    def vid(v) -> int:
        key = tuple(round(float(c), 12) for c in v)
        if key not in vert_index:
            vert_index[key] = len(verts) + 1
            verts.append(key)
        return vert_index[key]

    lines, tris = [], []
    for piece in x.all_pieces():
        if piece.dim == 1:
            lines.append([vid(v) for v in piece.verts])
        elif piece.dim == 2:
            ids = [vid(v) for v in piece.verts]
            for i in range(1, len(ids) - 1):
                tris.append((ids[0], ids[i], ids[i + 1]))
    for v in verts:
        coords = " ".join(f"{c:.12g}" for c in v)
        if len(v) == 2:
            coords += " 0"
        stream.write(f"v {coords}\n")
    for a, b in ((l[0], l[1]) for l in lines):
        stream.write(f"l {a} {b}\n")
    for a, b, c in tris:
        stream.write(f"f {a} {b} {c}\n")
