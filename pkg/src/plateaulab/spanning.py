"""Spanning conditions: mod-2 cubical (co)homology and linking tests.

The algebraic route replaces the classical continuity-based groups by
cubical homology of finite complexes over Z/2, where every membership
question is integer linear algebra.  The linking route tests polyhedral
intersection with a family of test cycles using exactly filtered
orientation predicates, so a true crossing is never lost to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fragments import Piece, segment
from .grid import Face, GridError
from .surface import CubicalSurface, face_to_piece, read_faces

__all__ = [
    "CubicalComplex",
    "SpanningCondition",
    "SpanResult",
    "gf2_rank",
    "gf2_solve",
    "gf2_nullspace",
    "homology_rank",
    "spans_algebraic",
    "spans_linking",
    "spans",
    "axiom_check",
    "refine_chain",
    "refine_cochain",
    "pieces_intersect",
    "loop_pieces",
    "read_condition",
    "write_condition",
]


# ---------------------------------------------------------------------------
# GF(2) linear algebra
# ---------------------------------------------------------------------------

def _row_reduce(mat: np.ndarray):
    """In-place mod-2 row echelon; returns pivot column list."""
    mat = mat.copy() % 2
    rows, cols = mat.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        hit = np.nonzero(mat[r:, c])[0]
        if len(hit) == 0:
            continue
        mat[[r, r + hit[0]]] = mat[[r + hit[0], r]]
        mask = mat[:, c] == 1
        mask[r] = False
        mat[mask] ^= mat[r]
        pivots.append(c)
        r += 1
    return mat, pivots


def gf2_rank(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    return len(_row_reduce(np.asarray(mat, dtype=np.uint8))[1])


def gf2_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """One solution of mat x = rhs over GF(2), or None."""
    mat = np.asarray(mat, dtype=np.uint8)
    rhs = np.asarray(rhs, dtype=np.uint8) % 2
    if mat.size == 0:
        return None if rhs.any() else np.zeros(mat.shape[1], dtype=np.uint8)
    aug = np.hstack([mat % 2, rhs[:, None]])
    red, pivots = _row_reduce(aug)
    cols = mat.shape[1]
    if cols in pivots:
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for r, c in enumerate(pivots):
        x[c] = red[r, -1]
    return x


def gf2_nullspace(mat: np.ndarray) -> list[np.ndarray]:
    mat = np.asarray(mat, dtype=np.uint8)
    cols = mat.shape[1]
    if cols == 0:
        return []
    if mat.size == 0:
        return [np.eye(cols, dtype=np.uint8)[i] for i in range(cols)]
    red, pivots = _row_reduce(mat)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[fc] = 1
        for r, pc in enumerate(pivots):
            v[pc] = red[r, fc]
        basis.append(v)
    return basis


# ---------------------------------------------------------------------------
# complexes
# ---------------------------------------------------------------------------

class CubicalComplex:
    """Finite cubical complex over Z/2, closed under boundary.

    All faces are normalized to one lattice level so incidence is exact
    integer arithmetic.
    """

    def __init__(self, faces, level: int | None = None):
        faces = list(faces)
        if faces:
            top = max(f.level for f in faces)
            if level is not None:
                if level < top:
                    raise GridError("cannot host faces finer than the complex level")
                top = level
            norm: set[Face] = set()
            for f in faces:
                norm.update(f.at_level(top))
            closed = set(norm)
            frontier = set(norm)
            while frontier:
                nxt = set()
                for f in frontier:
                    for b in f.boundary_faces():
                        if b not in closed:
                            closed.add(b)
                            nxt.add(b)
                frontier = nxt
            self.level = top
        else:
            closed = set()
            self.level = level if level is not None else 0
        self.by_dim: dict[int, list[Face]] = {}
        for f in sorted(closed):
            self.by_dim.setdefault(f.dim, []).append(f)
        self.index: dict[Face, int] = {}
        for d, fs in self.by_dim.items():
            for i, f in enumerate(fs):
                self.index[f] = i
        self._bnd: dict[int, np.ndarray] = {}

    def faces(self, d: int) -> list[Face]:
        return self.by_dim.get(d, [])

    @property
    def dims(self) -> list[int]:
        return sorted(self.by_dim)

    def face_count(self) -> int:
        return sum(len(v) for v in self.by_dim.values())

    def __contains__(self, face: Face) -> bool:
        return face in self.index

    def contains_complex(self, other: "CubicalComplex") -> bool:
        if other.level != self.level:
            return False
        return all(f in self.index for fs in other.by_dim.values() for f in fs)

    def boundary_matrix(self, d: int) -> np.ndarray:
        """Rows indexed by (d-1)-faces, columns by d-faces, entries mod 2."""
        if d in self._bnd:
            return self._bnd[d]
        lo, hi = self.faces(d - 1), self.faces(d)
        mat = np.zeros((len(lo), len(hi)), dtype=np.uint8)
        for jcol, f in enumerate(hi):
            for b in f.boundary_faces():
                mat[self.index[b], jcol] ^= 1
        self._bnd[d] = mat
        return mat

    def chain_vector(self, faces, d: int) -> np.ndarray:
        v = np.zeros(len(self.faces(d)), dtype=np.uint8)
        for f in faces:
            for g in f.at_level(self.level):
                if g.dim != d:
                    raise GridError(f"chain face dimension {g.dim} != {d}")
                if g not in self.index:
                    raise GridError(f"chain face {g} not in complex")
                v[self.index[g]] ^= 1
        return v

    def cochain_vector(self, faces, d: int) -> np.ndarray:
        """Like chain_vector, but for cochain supports: faces coarser than
        the complex go through the cochain transfer, and support the
        complex does not contain restricts to zero.
        """
        v = np.zeros(len(self.faces(d)), dtype=np.uint8)
        for f in faces:
            if f.level > self.level:
                raise GridError("cochain support finer than the complex")
            support = refine_cochain([f], self.level - f.level)
            for g in support:
                if g.dim != d:
                    raise GridError(f"cochain face dimension {g.dim} != {d}")
                if g in self.index:
                    v[self.index[g]] ^= 1
        return v

    def vector_chain(self, v: np.ndarray, d: int) -> list[Face]:
        return [f for f, bit in zip(self.faces(d), v) if bit]

    def is_cycle(self, v: np.ndarray, d: int) -> bool:
        if d == 0:
            return True
        return not (self.boundary_matrix(d) @ v % 2).any()

    def is_cocycle(self, v: np.ndarray, d: int) -> bool:
        bd = self.boundary_matrix(d + 1)
        if bd.size == 0:
            return True
        return not (bd.T @ v % 2).any()


def homology_rank(k: CubicalComplex, d: int):
    """(rank, basis) of reduced H_d over Z/2, basis as cycle face-lists.

    In degree zero the theory is reduced by quotienting out one point
    class, so a connected complex has rank 0.
    """
    bd = k.boundary_matrix(d)
    bdp = k.boundary_matrix(d + 1)
    nd = len(k.faces(d))
    if nd == 0:
        return 0, []
    if d == 0:
        kernel = [np.eye(nd, dtype=np.uint8)[i] for i in range(nd)]
    else:
        kernel = gf2_nullspace(bd)
    rank = max(len(kernel) - gf2_rank(bdp) - (1 if d == 0 else 0), 0)

    # representatives: kernel vectors independent modulo the boundary span
    span = bdp.T.copy() if bdp.size else np.zeros((0, nd), dtype=np.uint8)
    if d == 0:
        onept = np.zeros((1, nd), dtype=np.uint8)
        onept[0, 0] = 1
        span = np.vstack([span, onept])
    cur_rank = gf2_rank(span)
    basis = []
    for v in kernel:
        if len(basis) == rank:
            break
        cand = np.vstack([span, v[None, :]])
        r = gf2_rank(cand)
        if r > cur_rank:
            basis.append(k.vector_chain(v, d))
            span, cur_rank = cand, r
    return rank, basis


def refine_chain(faces: list[Face], times: int = 1) -> list[Face]:
    """Subdivision chain map: each face to all its children (mod 2)."""
    out = list(faces)
    for _ in range(times):
        nxt: dict[Face, int] = {}
        for f in out:
            for c in f.refine():
                nxt[c] = nxt.get(c, 0) ^ 1
        out = [f for f, bit in nxt.items() if bit]
    return sorted(out)


def refine_cochain(faces: list[Face], times: int = 1) -> list[Face]:
    """Cochain transfer dual to the coordinatewise floor map.

    A fine face maps non-degenerately iff its spanned anchors are odd, in
    which case its image halves every anchor; the transferred cochain is
    supported on all such preimages of the support.  Pairs with
    refine_chain (evaluation on refined chains is preserved) and sends
    cocycles to cocycles, since the floor map is cellular.
    """
    from itertools import product as _product

    out = list(faces)
    for _ in range(times):
        nxt = []
        for f in out:
            free = [i for i in range(f.n) if i not in f.axes]
            for bits in _product((0, 1), repeat=len(free)):
                anc = [2 * a for a in f.anchor]
                for a in f.axes:
                    anc[a] += 1
                for i, b in zip(free, bits):
                    anc[i] += b
                nxt.append(Face(f.level + 1, tuple(anc), f.axes))
        out = nxt
    return sorted(out)


# ---------------------------------------------------------------------------
# conditions
# ---------------------------------------------------------------------------

@dataclass
class SpanningCondition:
    """Algebraic data L1..L4 (chain/cochain representatives over Z/2) or a
    family of linking test cycles (closed polyhedral manifolds in C - A).
    """

    kind: str
    m: int
    n: int
    l1: list[list[Face]] = field(default_factory=list)
    l2: list[list[Face]] = field(default_factory=list)
    l3: list[list[Face]] = field(default_factory=list)
    l4: list[list[Face]] = field(default_factory=list)
    test_cycles: list[list[Piece]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("algebraic", "linking"):
            raise ValueError(f"unknown condition kind {self.kind!r}")

    def refined(self, times: int = 1) -> "SpanningCondition":
        return SpanningCondition(
            self.kind, self.m, self.n,
            [refine_chain(c, times) for c in self.l1],
            [refine_cochain(c, times) for c in self.l2],
            [refine_chain(c, times) for c in self.l3],
            [refine_cochain(c, times) for c in self.l4],
            self.test_cycles,
        )


@dataclass
class SpanResult:
    spans: bool
    witness: object = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.spans


def _surface_complex(x: CubicalSurface, level: int | None = None) -> CubicalComplex:
    if x.pieces:
        raise GridError("algebraic spanning needs a pure grid surface")
    return CubicalComplex(list(x.faces) + list(x.a_faces), level=level)


def spans_algebraic(x, a, cond: SpanningCondition, c) -> SpanResult:
    """Mod-2 test of the four algebraic conditions.

    x may be a CubicalSurface or a complex; a and c are complexes (or face
    lists).  Everything is refined to a common lattice level first, and
    the condition representatives must already live at that level.
    """
    if cond.kind != "algebraic":
        raise ValueError("condition is not algebraic")
    m = cond.m
    levels = []
    ka = a if isinstance(a, CubicalComplex) else CubicalComplex(a)
    kc = c if isinstance(c, CubicalComplex) else CubicalComplex(c)
    kx = x if isinstance(x, CubicalComplex) else _surface_complex(x)
    top = max(ka.level, kc.level, kx.level)
    if ka.level != top:
        ka = CubicalComplex([f for fs in ka.by_dim.values() for f in fs], level=top)
    if kc.level != top:
        kc = CubicalComplex([f for fs in kc.by_dim.values() for f in fs], level=top)
    if kx.level != top:
        kx = CubicalComplex([f for fs in kx.by_dim.values() for f in fs], level=top)
    if not kx.contains_complex(ka):
        raise GridError("bounding complex A is not contained in X")
    if not kc.contains_complex(kx):
        raise GridError("X is not contained in the ambient complex C")

    # L1: every class must die in X
    for chain in cond.l1:
        v = ka.chain_vector(chain, m - 1)
        if not ka.is_cycle(v, m - 1):
            raise GridError("an L1 representative is not a cycle in A")
        target = kx.chain_vector(ka.vector_chain(v, m - 1), m - 1)
        if gf2_solve(kx.boundary_matrix(m), target) is None:
            return SpanResult(False, chain, "L1 class survives in X")

    # L2: no X-cocycle class may restrict to the class
    for coch in cond.l2:
        lam = ka.cochain_vector(coch, m - 1)
        if not ka.is_cocycle(lam, m - 1):
            raise GridError("an L2 representative is not a cocycle in A")
        if _cohomology_restricts(kx, ka, lam, m - 1):
            return SpanResult(False, coch, "L2 class lies in the image of restriction")

    # L3: every class must be realized by a cycle in X
    for chain in cond.l3:
        lam = kc.chain_vector(chain, m)
        if not kc.is_cycle(lam, m):
            raise GridError("an L3 representative is not a cycle in C")
        if not _homology_realized(kx, kc, lam, m):
            return SpanResult(False, chain, "L3 class is not realized by X")

    # L4: no class may die on restriction to X
    for coch in cond.l4:
        lam = kc.cochain_vector(coch, m)
        if not kc.is_cocycle(lam, m):
            raise GridError("an L4 representative is not a cocycle in C")
        support = {f for f, bit in zip(kc.faces(m), lam) if bit}
        restr = np.array([1 if f in support else 0 for f in kx.faces(m)],
                         dtype=np.uint8)
        # lam restricted to X is a coboundary iff delta_X w = restr is solvable
        if gf2_solve(kx.boundary_matrix(m).T, restr) is not None:
            return SpanResult(False, coch, "L4 class dies on restriction to X")
    return SpanResult(True)


def _cohomology_restricts(kx: CubicalComplex, ka: CubicalComplex,
                          lam: np.ndarray, d: int) -> bool:
    """Is [lam] in the image of H^d(X) -> H^d(A)?

    Solve: z an X-cocycle, w an A-(d-1)-cochain, z|_A + delta_A w = lam.
    """
    xf = kx.faces(d)
    af = ka.faces(d)
    awf = ka.faces(d - 1) if d >= 1 else []
    n_z, n_w = len(xf), len(awf)
    cocycle = kx.boundary_matrix(d + 1).T  # rows: (d+1)-faces of X
    restrict = np.zeros((len(af), n_z), dtype=np.uint8)
    xindex = {f: i for i, f in enumerate(xf)}
    for i, f in enumerate(af):
        restrict[i, xindex[f]] = 1
    delta_a = ka.boundary_matrix(d).T if d >= 1 else np.zeros((len(af), 0), np.uint8)
    top = np.hstack([cocycle, np.zeros((cocycle.shape[0], n_w), dtype=np.uint8)])
    bot = np.hstack([restrict, delta_a])
    mat = np.vstack([top, bot])
    rhs = np.concatenate([np.zeros(cocycle.shape[0], dtype=np.uint8), lam])
    return gf2_solve(mat, rhs) is not None


def _homology_realized(kx: CubicalComplex, kc: CubicalComplex,
                       lam: np.ndarray, d: int) -> bool:
    """Is [lam] in the image of H_d(X) -> H_d(C)?

    Solve: z an X-cycle, w a C-(d+1)-chain, embed(z) + bnd_C w = lam.
    """
    xf = kx.faces(d)
    n_z = len(xf)
    bx = kx.boundary_matrix(d)
    bcp = kc.boundary_matrix(d + 1)
    cindex = {f: i for i, f in enumerate(kc.faces(d))}
    embed = np.zeros((len(kc.faces(d)), n_z), dtype=np.uint8)
    for i, f in enumerate(xf):
        embed[cindex[f], i] = 1
    top = np.hstack([bx, np.zeros((bx.shape[0], bcp.shape[1]), dtype=np.uint8)])
    bot = np.hstack([embed, bcp])
    mat = np.vstack([top, bot])
    rhs = np.concatenate([np.zeros(bx.shape[0], dtype=np.uint8), lam])
    return gf2_solve(mat, rhs) is not None


# ---------------------------------------------------------------------------
# exact intersection predicates
# ---------------------------------------------------------------------------

_FILTER_EPS = 1e-10


def _orient_exact(rows) -> int:
    """Sign of det over exact rationals; rows are difference vectors."""
    fr = [[v if isinstance(v, Fraction) else Fraction(float(v)) for v in r]
          for r in rows]
    k = len(fr)
    if k == 1:
        det = fr[0][0]
    elif k == 2:
        det = fr[0][0] * fr[1][1] - fr[0][1] * fr[1][0]
    else:
        det = (fr[0][0] * (fr[1][1] * fr[2][2] - fr[1][2] * fr[2][1])
               - fr[0][1] * (fr[1][0] * fr[2][2] - fr[1][2] * fr[2][0])
               + fr[0][2] * (fr[1][0] * fr[2][1] - fr[1][1] * fr[2][0]))
    return (det > 0) - (det < 0)


def orient2d(a, b, c) -> int:
    rows = [[float(b[0]) - float(a[0]), float(b[1]) - float(a[1])],
            [float(c[0]) - float(a[0]), float(c[1]) - float(a[1])]]
    det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    mag = (abs(rows[0][0]) + abs(rows[0][1])) * (abs(rows[1][0]) + abs(rows[1][1]))
    if abs(det) > _FILTER_EPS * max(mag, 1e-300):
        return 1 if det > 0 else -1
    fa, fb, fc = ([Fraction(float(v)) for v in q] for q in (a, b, c))
    return _orient_exact([[fb[0] - fa[0], fb[1] - fa[1]],
                          [fc[0] - fa[0], fc[1] - fa[1]]])


def orient3d(a, b, c, d) -> int:
    fa = [float(v) for v in a]
    rows = [[float(b[i]) - fa[i] for i in range(3)],
            [float(c[i]) - fa[i] for i in range(3)],
            [float(d[i]) - fa[i] for i in range(3)]]
    det = (rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
           - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
           + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0]))
    mag = sum(abs(v) for r in rows for v in r) ** 3
    if abs(det) > _FILTER_EPS * max(mag, 1e-300):
        return 1 if det > 0 else -1
    fr = [[Fraction(float(q[i])) - Fraction(float(a[i])) for i in range(3)]
          for q in (b, c, d)]
    return _orient_exact(fr)


def _point_in_triangle_2d(p, a, b, c) -> bool:
    s1, s2, s3 = orient2d(a, b, p), orient2d(b, c, p), orient2d(c, a, p)
    return (s1 >= 0 and s2 >= 0 and s3 >= 0) or (s1 <= 0 and s2 <= 0 and s3 <= 0)


def segment_segment_intersect_2d(a0, a1, b0, b1) -> bool:
    d1, d2 = orient2d(a0, a1, b0), orient2d(a0, a1, b1)
    d3, d4 = orient2d(b0, b1, a0), orient2d(b0, b1, a1)
    if ((d1 > 0) != (d2 > 0) or 0 in (d1, d2)) and ((d3 > 0) != (d4 > 0) or 0 in (d3, d4)):
        if d1 == 0 and d2 == 0:
            # collinear: 1d interval overlap on the dominant axis
            ax = 0 if abs(a1[0] - a0[0]) >= abs(a1[1] - a0[1]) else 1
            lo_a, hi_a = sorted((a0[ax], a1[ax]))
            lo_b, hi_b = sorted((b0[ax], b1[ax]))
            return hi_a >= lo_b and hi_b >= lo_a
        ok_a = (d1 > 0) != (d2 > 0) or d1 == 0 or d2 == 0
        ok_b = (d3 > 0) != (d4 > 0) or d3 == 0 or d4 == 0
        return ok_a and ok_b
    return False


def segment_triangle_intersect(p0, p1, t0, t1, t2) -> bool:
    """Closed intersection test in R^3, exact via filtered predicates."""
    s0 = orient3d(t0, t1, t2, p0)
    s1 = orient3d(t0, t1, t2, p1)
    if s0 != 0 and s0 == s1:
        return False
    if s0 == 0 and s1 == 0:
        # coplanar: project away the dominant normal coordinate
        u = np.cross(np.subtract(t1, t0), np.subtract(t2, t0))
        drop = int(np.argmax(np.abs(u))) if np.abs(u).max() > 0 else 2
        keep = [i for i in range(3) if i != drop]
        q0, q1 = [p0[i] for i in keep], [p1[i] for i in keep]
        v0, v1, v2 = ([t[i] for i in keep] for t in (t0, t1, t2))
        if _point_in_triangle_2d(q0, v0, v1, v2) or _point_in_triangle_2d(q1, v0, v1, v2):
            return True
        for e0, e1 in ((v0, v1), (v1, v2), (v2, v0)):
            if segment_segment_intersect_2d(q0, q1, e0, e1):
                return True
        return False
    s_ab = orient3d(p0, p1, t0, t1)
    s_bc = orient3d(p0, p1, t1, t2)
    s_ca = orient3d(p0, p1, t2, t0)
    return (s_ab >= 0 and s_bc >= 0 and s_ca >= 0) or \
           (s_ab <= 0 and s_bc <= 0 and s_ca <= 0)


def pieces_intersect(a: Piece, b: Piece) -> bool:
    """Closed intersection of two pieces (dims as used by linking tests)."""
    lo_a, hi_a = a.bbox()
    lo_b, hi_b = b.bbox()
    if np.any(lo_a > hi_b + 1e-12) or np.any(lo_b > hi_a + 1e-12):
        return False
    if a.dim > b.dim:
        a, b = b, a
    if a.dim == 1 and b.dim == 2 and a.n == 3:
        for tri in b.triangulate():
            if segment_triangle_intersect(a.verts[0], a.verts[1], *tri.verts):
                return True
        return False
    if a.dim == 1 and b.dim == 1 and a.n == 2:
        return segment_segment_intersect_2d(a.verts[0], a.verts[1],
                                            b.verts[0], b.verts[1])
    if a.dim == 0:
        # point membership, decided by distance for the 1d/2d hosts
        q = a.verts[0]
        if b.dim == 1:
            u = b.verts[1] - b.verts[0]
            t = float(np.clip(np.dot(q - b.verts[0], u) / max(np.dot(u, u), 1e-300), 0, 1))
            return bool(np.linalg.norm(b.verts[0] + t * u - q) < 1e-12)
        if b.dim == 2:
            for tri in b.triangulate():
                v0, v1, v2 = tri.verts
                nrm = np.cross(v1 - v0, v2 - v0)
                if abs(np.dot(q - v0, nrm)) > 1e-12 * max(1.0, np.linalg.norm(nrm)):
                    continue
                drop = int(np.argmax(np.abs(nrm)))
                keep = [i for i in range(3) if i != drop] if b.n == 3 else [0, 1]
                if _point_in_triangle_2d([q[i] for i in keep], [v0[i] for i in keep],
                                         [v1[i] for i in keep], [v2[i] for i in keep]):
                    return True
            return False
    raise NotImplementedError(f"intersection for dims {a.dim},{b.dim} in R^{a.n}")


def loop_pieces(vertices) -> list[Piece]:
    """Closed polyline as segment pieces."""
    v = np.asarray(vertices, dtype=float)
    return [segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


def min_distance_pieces(a: list[Piece], b: list[Piece], spacing: float = 0.02) -> float:
    from scipy.spatial import cKDTree
    pa = np.vstack([p.sample_points(spacing) for p in a])
    pb = np.vstack([p.sample_points(spacing) for p in b])
    return float(cKDTree(pa).query(pb)[0].min())


def spans_linking(x: CubicalSurface, cond: SpanningCondition,
                  a_pieces=None) -> SpanResult:
    """X spans iff it meets every test cycle; exact polyhedral tests."""
    if cond.kind != "linking":
        raise ValueError("condition is not linking")
    guard = list(a_pieces) if a_pieces is not None else list(x.a_pieces) + [
        face_to_piece(f) for f in x.a_faces]
    for k, cycle in enumerate(cond.test_cycles):
        if guard and min_distance_pieces(cycle, guard) < 1e-9:
            raise GridError(f"test cycle {k} meets the bounding set")
    surf = [p for p in x.surface_pieces() if p.dim == x.m]
    for k, cycle in enumerate(cond.test_cycles):
        hit = False
        for seg_piece in cycle:
            for sp in surf:
                if pieces_intersect(seg_piece, sp):
                    hit = True
                    break
            if hit:
                break
        if not hit:
            return SpanResult(False, k, f"test cycle {k} missed")
    return SpanResult(True)


def spans(x: CubicalSurface, cond: SpanningCondition, a=None, c=None) -> SpanResult:
    if cond.kind == "algebraic":
        return spans_algebraic(x, a, cond, c)
    return spans_linking(x, cond)


# ---------------------------------------------------------------------------
# axiom checks
# ---------------------------------------------------------------------------

@dataclass
class AxiomReport:
    entries: list[tuple[str, bool, str]]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.entries)


def axiom_check(cond: SpanningCondition, x: CubicalSurface,
                image: CubicalSurface | None = None,
                sequence: list[CubicalSurface] | None = None,
                limit: CubicalSurface | None = None,
                a=None, c=None,
                fixes_bounding: bool = True) -> AxiomReport:
    """Empirical instances of the two spanning-collection axioms.

    image: the reduced deformed surface g(X)-dagger for a map g fixing A.
    sequence/limit: a convergent family and its limit, both reduced.
    """
    entries = []
    if not fixes_bounding:
        raise GridError("the deformation moves the bounding set")
    base = spans(x, cond, a, c)
    entries.append(("input spans", bool(base), base.detail))
    if image is not None:
        res = spans(image, cond, a, c)
        entries.append(("deformed image spans", bool(res), res.detail))
    if sequence is not None:
        for i, xk in enumerate(sequence):
            res = spans(xk, cond, a, c)
            entries.append((f"term {i} spans", bool(res), res.detail))
    if limit is not None:
        res = spans(limit, cond, a, c)
        entries.append(("limit spans", bool(res), res.detail))
    return AxiomReport(entries)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_condition(cond: SpanningCondition, a_faces=(), c_faces=()) -> str:
    lines = [f"kind {cond.kind}", f"m {cond.m}", f"n {cond.n}"]
    from .surface import write_faces

    def face_block(tag, faces):
        lines.append(f"[{tag}]")
        lines.extend(write_faces(faces).splitlines())

    if a_faces:
        face_block("A", a_faces)
    if c_faces:
        face_block("C", c_faces)
    for tag, chains in (("L1", cond.l1), ("L2", cond.l2), ("L3", cond.l3),
                        ("L4", cond.l4)):
        for chain in chains:
            face_block(tag, chain)
    for cycle in cond.test_cycles:
        lines.append("[test]")
        pts = [cycle[i].verts[0] for i in range(len(cycle))]
        flat = " ".join(f"{v:.12g}" for q in pts for v in q)
        lines.append(f"loop {flat}")
    return "\n".join(lines) + "\n"


def read_condition(text: str):
    """Parse a condition file; returns (condition, a_faces, c_faces)."""
    kind, m, n = None, None, None
    section = None
    blocks: dict[str, list[list[str]]] = {}
    order: list[tuple[str, list[str]]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            order.append((section, []))
            continue
        if section is None:
            key, _, val = line.partition(" ")
            if key == "kind":
                kind = val.strip()
            elif key == "m":
                m = int(val)
            elif key == "n":
                n = int(val)
            continue
        order[-1][1].append(line)
    if kind is None or m is None or n is None:
        raise GridError("condition file needs kind, m and n headers")
    cond = SpanningCondition(kind, m, n)
    a_faces, c_faces = [], []
    for tag, lines in order:
        body = "\n".join(lines)
        if tag == "A":
            a_faces = read_faces(body)
        elif tag == "C":
            c_faces = read_faces(body)
        elif tag in ("L1", "L2", "L3", "L4"):
            getattr(cond, tag.lower()).append(read_faces(body))
        elif tag == "test":
            for line in lines:
                parts = line.split()
                if parts[0] != "loop":
                    raise GridError(f"unknown test entry {parts[0]!r}")
                vals = [float(v) for v in parts[1:]]
                pts = np.array(vals).reshape(-1, n)
                cond.test_cycles.append(loop_pieces(pts))
        else:
            raise GridError(f"unknown section [{tag}]")
    return cond, a_faces, c_faces
