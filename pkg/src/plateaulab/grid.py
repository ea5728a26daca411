"""Dyadic grids and axis-aligned lattice faces.

A face is stored with exact integer data: an anchor in units of
``2**-level`` plus the subset of axes it spans.  All grid incidence
(subdivision, boundary, containment) is integer arithmetic; floating
point enters only when a face is turned into geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

__all__ = ["Face", "DyadicGrid", "face_count", "GridError"]


class GridError(ValueError):
    """Domain error for grid operations."""


@dataclass(frozen=True, order=True)
class Face:
    """Closed axis-aligned dyadic face.

    The face occupies ``[a_i * s, (a_i + 1) * s]`` on each spanned axis
    and ``{a_i * s}`` on the others, where ``s = 2**-level``.  ``level``
    may be negative (side > 1).
    """

    level: int
    anchor: tuple[int, ...]
    axes: tuple[int, ...]

    def __post_init__(self):
        if tuple(sorted(set(self.axes))) != self.axes:
            raise GridError(f"axes must be sorted and unique, got {self.axes}")
        if any(a < 0 or a >= len(self.anchor) for a in self.axes):
            raise GridError(f"axis out of range for n={len(self.anchor)}")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def n(self) -> int:
        return len(self.anchor)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    def measure(self, d: int | None = None) -> float:
        """d-dimensional Hausdorff measure; zero when d exceeds the face dim."""
        if d is None:
            d = self.dim
        if d == self.dim:
            return self.side ** d
        return 0.0

    def min_corner(self) -> np.ndarray:
        return np.asarray(self.anchor, dtype=float) * self.side

    def max_corner(self) -> np.ndarray:
        hi = np.asarray(self.anchor, dtype=float)
        for a in self.axes:
            hi[a] += 1.0
        return hi * self.side

    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner() + self.max_corner())

    def corners(self) -> np.ndarray:
        """All 2**dim corner points, lexicographic in the spanned axes."""
        lo = self.min_corner()
        pts = []
        for bits in product((0, 1), repeat=self.dim):
            q = lo.copy()
            for b, a in zip(bits, self.axes):
                q[a] += b * self.side
            pts.append(q)
        return np.asarray(pts)

    def vertices(self) -> list["Face"]:
        """The 0-faces of this face."""
        out = []
        for bits in product((0, 1), repeat=self.dim):
            anc = list(self.anchor)
            for b, a in zip(bits, self.axes):
                anc[a] += b
            out.append(Face(self.level, tuple(anc), ()))
        return out

    def boundary_faces(self) -> list["Face"]:
        """The 2*dim codimension-one faces."""
        out = []
        for a in self.axes:
            rest = tuple(x for x in self.axes if x != a)
            out.append(Face(self.level, self.anchor, rest))
            anc = list(self.anchor)
            anc[a] += 1
            out.append(Face(self.level, tuple(anc), rest))
        return out

    def refine(self, levels: int = 1) -> list["Face"]:
        """Subdivide into 2**(dim*levels) faces one or more levels finer."""
        faces = [self]
        for _ in range(levels):
            nxt = []
            for f in faces:
                base = tuple(2 * a for a in f.anchor)
                for bits in product((0, 1), repeat=f.dim):
                    anc = list(base)
                    for b, a in zip(bits, f.axes):
                        anc[a] += b
                    nxt.append(Face(f.level + 1, tuple(anc), f.axes))
            faces = nxt
        return faces

    def at_level(self, level: int) -> list["Face"]:
        """This face re-expressed as faces at a finer (or equal) level."""
        if level < self.level:
            raise GridError("cannot coarsen a face exactly")
        return self.refine(level - self.level)

    def contains_face(self, other: "Face") -> bool:
        """Point-set containment, decided exactly on the integer lattice."""
        if other.level < self.level:
            return False
        shift = other.level - self.level
        scale = 1 << shift
        for i in range(self.n):
            lo = self.anchor[i] * scale
            hi = lo + (scale if i in self.axes else 0)
            olo = other.anchor[i]
            ohi = olo + (1 if i in other.axes else 0)
            if olo < lo or ohi > hi:
                return False
        return True

    def contains_point(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        lo, hi = self.min_corner(), self.max_corner()
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))


def _dyadic_int(value: float, level: int) -> int:
    """value * 2**level as an exact integer, or raise."""
    num, den = float(value).as_integer_ratio()
    scaled = num * (2 ** level) if level >= 0 else num
    if level < 0:
        den *= 2 ** (-level)
    if scaled % den != 0:
        raise GridError(f"{value} is not a lattice point at level {level}")
    return scaled // den


@dataclass(frozen=True)
class DyadicGrid:
    """The level-j dyadic subdivision of an axis-aligned cube Q.

    The cube must have side length a power of two and a corner that is a
    lattice point at the subcube scale, so every face of the subdivision
    is an exact :class:`Face`.
    """

    corner: tuple[float, ...]
    side: float
    j: int

    def __post_init__(self):
        if self.side <= 0:
            raise GridError("cube side must be positive")
        e = math.log2(self.side)
        if abs(e - round(e)) > 1e-12:
            raise GridError(f"cube side {self.side} is not a power of two")
        if self.j < 0:
            raise GridError("subdivision level must be non-negative")
        # validate the corner, raising early if it is off-lattice
        self.corner_anchor  # noqa: B018

    @classmethod
    def from_center(cls, center, side: float, j: int) -> "DyadicGrid":
        center = np.asarray(center, dtype=float)
        return cls(tuple(center - side / 2.0), float(side), j)

    @property
    def n(self) -> int:
        return len(self.corner)

    @property
    def side_exp(self) -> int:
        return round(math.log2(self.side))

    @property
    def face_level(self) -> int:
        """Lattice level of the subcube faces (side 2**-face_level)."""
        return self.j - self.side_exp

    @property
    def subcube_side(self) -> float:
        return self.side / 2 ** self.j

    @property
    def corner_anchor(self) -> tuple[int, ...]:
        lvl = self.face_level
        return tuple(_dyadic_int(c, lvl) for c in self.corner)

    @property
    def cube(self) -> Face:
        exp = self.side_exp
        anchor = tuple(_dyadic_int(c, -exp) for c in self.corner)
        return Face(-exp, anchor, tuple(range(self.n)))

    def subdivide(self, d: int) -> list[Face]:
        """All d-dimensional faces of the level-j subdivision, deduplicated."""
        n = self.n
        if d < 0 or d > n:
            raise GridError(f"face dimension {d} out of range 0..{n}")
        s = 2 ** self.j
        lvl = self.face_level
        base = self.corner_anchor
        faces = []
        for axes in combinations(range(n), d):
            spanned = set(axes)
            ranges = [range(s) if i in spanned else range(s + 1) for i in range(n)]
            for rel in product(*ranges):
                anchor = tuple(base[i] + rel[i] for i in range(n))
                faces.append(Face(lvl, anchor, axes))
        faces.sort()
        return faces

    def cells(self) -> list[Face]:
        return self.subdivide(self.n)

    def skeleton(self, d: int) -> set[Face]:
        """S_{j,d}(Q) as a set of faces."""
        return set(self.subdivide(d))

    def cell_index(self, x) -> tuple[int, ...]:
        """Index of the subcube containing x, clipped to the grid."""
        x = np.asarray(x, dtype=float)
        s = 2 ** self.j
        idx = np.floor((x - np.asarray(self.corner)) / self.subcube_side)
        idx = np.clip(idx, 0, s - 1).astype(int)
        return tuple(idx)


def face_count(n: int, j: int, d: int) -> int:
    """Closed-form count of d-faces in the level-j subdivision of an n-cube."""
    if d < 0 or d > n:
        raise GridError(f"face dimension {d} out of range 0..{n}")
    s = 2 ** j
    return math.comb(n, d) * s ** d * (s + 1) ** (n - d)
