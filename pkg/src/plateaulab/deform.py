"""Cone constructions and the annular cone-approximation deformation.

The deformation replaces the part of a surface inside a ball by a thin
transition ribbon near the sphere slice plus a cone over a skeletal
approximation of the slice.  Every step of the assembly is the one the
underlying construction prescribes: radial squeeze to the cone over the
slice, sphere-wise skeleton projection of the slice at a level chosen
from the target accuracy, radial cone extension inside the reduced
radius, and the ambient nearest-point retraction.  All quantitative
bounds are measured and asserted on the produced fragments.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ambient import AmbientSpace
from .fragments import Piece, segment, triangle
from .grid import GridError
from .skeleton import FFConfig, ProjectionRecord, ff_project
from .surface import (
    CubicalSurface,
    hausdorff_distance,
    hausdorff_measure,
    reduce_surface,
    restrict_ball,
)

__all__ = [
    "ConeSet",
    "cone",
    "SqueezeSequence",
    "cone_squeeze_sequence",
    "DeformationRecord",
    "DeformationError",
    "annular_deformation",
    "collar_face_count",
]


class DeformationError(RuntimeError):
    """A precondition failed or the bound-retry loop was exhausted."""


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeSet:
    """The union of closed segments from a basepoint to a base set."""

    basepoint: np.ndarray
    base: tuple[Piece, ...]
    pieces: tuple[Piece, ...]

    def measure(self, m: int) -> float:
        items = [p for p in self.pieces if p.dim == m]
        return hausdorff_measure(items, m) if items else 0.0


def cone(p, base) -> ConeSet:
    """Cone over a set of pieces: each base simplex fans to the basepoint.

    cone of nothing is nothing, by convention.
    """
    p = np.asarray(p, dtype=float)
    out = []
    for b in base:
        if b.dim == 0:
            out.append(segment(p, b.verts[0]))
        elif b.dim == 1:
            out.append(triangle(p, b.verts[0], b.verts[1]))
        else:
            for tri in b.triangulate():
                out.append(Piece(np.vstack([[p], tri.verts]), 3))
    out = [q for q in out if q.measure() > 1e-14]
    return ConeSet(p, tuple(base), tuple(out))


# ---------------------------------------------------------------------------
# radial squeeze sequence
# ---------------------------------------------------------------------------

def _squeeze_profile(t: float, r: float, s):
    """Increasing radial profile: identity beyond r, linear compression by
    (1-t)/2 up to the knot r*t, then linear out to the fixed sphere.  The
    value at r*t is r*t*(1-t)/2 < r*(1-t); corners stand in for the smooth
    profile at desk scale."""
    s = np.asarray(s, dtype=float)
    if t <= 0:
        return s.copy()
    c = (1.0 - t) / 2.0
    knot = r * t
    out = s.copy()
    low = s <= knot
    out[low] = c * s[low]
    mid = (s > knot) & (s < r)
    if knot < r:
        slope = (r - c * knot) / (r - knot)
        out[mid] = r + slope * (s[mid] - r)
    return out


@dataclass
class SqueezeSequence:
    center: np.ndarray
    radius: float
    schedule: list[float]
    images: list[np.ndarray]          # point-cloud images of X per step
    limit: CubicalSurface             # (X minus ball) union cone over slice
    distances: list[float]            # image-to-limit Hausdorff distances

    def is_cauchy(self, tol: float) -> bool:
        """Distances decrease (up to sampling jitter) and end below tol."""
        slack = tol / 20.0
        return self.distances[-1] <= tol and all(
            d2 <= d1 + slack for d1, d2 in zip(self.distances, self.distances[1:]))


def cone_squeeze_sequence(x: CubicalSurface, p, r: float, schedule,
                          spacing: float = 0.02, layers: int = 32) -> SqueezeSequence:
    """Apply the radial squeeze maps along the schedule and certify the
    Hausdorff convergence toward the exact polyhedral limit.

    The image clouds are refined adaptively: per step, extra samples come
    from sphere slices at radii spanning the steep zone of the profile,
    so the sampled image resolves the whiskers along the limit cone.
    """
    schedule = [float(t) for t in schedule]
    if any(t < 0 or t >= 1 for t in schedule) or \
            any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise GridError("schedule must be increasing inside [0, 1)")
    p = np.asarray(p, dtype=float)
    base = x.sample_points(spacing, include_bounding=False)
    br = restrict_ball(x, p, r)
    limit_pieces = list(br.outside) + list(cone(p, br.slice_pieces).pieces)
    limit = CubicalSurface(x.m, x.n, pieces=tuple(
        q for q in limit_pieces if q.dim == x.m),
        a_faces=x.a_faces, a_pieces=x.a_pieces)
    limit_pts = limit.sample_points(spacing, include_bounding=False)
    if len(limit_pts) == 0:
        limit_pts = np.atleast_2d(p)

    def squeeze(points, t):
        d = points - p
        norms = np.linalg.norm(d, axis=1)
        new_norms = _squeeze_profile(t, r, norms)
        scale = np.where(norms > 1e-12, new_norms / np.maximum(norms, 1e-300), 0.0)
        return p + d * scale[:, None]

    images, dists = [], []
    for t in schedule:
        clouds = [squeeze(base, t)] if len(base) else []
        for s in np.linspace(t * r, r, layers + 1)[1:-1]:
            sl = restrict_ball(x, p, s).slice_pieces
            if not sl:
                continue
            pts = np.vstack([q.sample_points(spacing) for q in sl])
            clouds.append(squeeze(pts, t))
        img = np.vstack(clouds) if clouds else np.zeros((0, x.n))
        images.append(img)
        dists.append(hausdorff_distance(img, limit_pts) if len(img) else 0.0)
    return SqueezeSequence(p, float(r), schedule, images, limit, dists)


# ---------------------------------------------------------------------------
# collar face count
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def collar_face_count(n: int, m: int, j: int, eps: float) -> int:
    """Exact count of (m-1)-faces of the level-j grid on [-1,1]^n meeting
    the closed eps-collar of the unit sphere.

    A face (an axis box) meets the collar iff its interval norm straddles
    [1-eps, 1+eps]; with the other coordinates fixed, both conditions cut
    contiguous windows in the last anchor, which are counted in closed
    form per row.
    """
    s = 2 ** j
    cell = 2.0 / s
    d = m - 1
    lo_r, hi_r = 1.0 - eps, 1.0 + eps
    total = 0
    from itertools import combinations, product as _product

    for axes in combinations(range(n), d):
        spanned = set(axes)
        zax = n - 1
        head = list(range(n - 1))
        ranges = [np.arange(s if i in spanned else s + 1) for i in head]
        mesh = np.meshgrid(*ranges, indexing="ij") if ranges else []
        if ranges:
            anchors = np.stack([g.ravel().astype(float) for g in mesh], axis=1)
        else:
            anchors = np.zeros((1, 0))
        lo = -1.0 + anchors * cell
        hi = lo.copy()
        for col, i in enumerate(head):
            if i in spanned:
                hi[:, col] += cell
        close = np.maximum(np.maximum(lo, -hi), 0.0)
        far = np.maximum(np.abs(lo), np.abs(hi))
        s_c = (close ** 2).sum(axis=1)
        s_m = (far ** 2).sum(axis=1)

        z_spanned = zax in spanned
        z_count = s if z_spanned else s + 1
        width = cell if z_spanned else 0.0

        # near condition: close_z <= sqrt(max(hi_r^2 - s_c, 0)); rows with
        # s_c > hi_r^2 contribute nothing
        ok = s_c <= hi_r ** 2 + 1e-15
        t1 = np.sqrt(np.maximum(hi_r ** 2 - s_c, 0.0))
        # close_z(k) = max(-1 + k cell, 1 - k cell - width, 0) <= t1
        k_lo1 = np.ceil((1.0 - width - t1) / cell - 1e-12)
        k_hi1 = np.floor((1.0 + t1) / cell + 1e-12)
        k_lo1 = np.clip(k_lo1, 0, z_count - 1)
        k_hi1 = np.clip(k_hi1, -1, z_count - 1)
        near_n = np.where(ok, np.maximum(k_hi1 - k_lo1 + 1, 0), 0)

        # far condition fails only inside a window: far_z < sqrt(lo_r^2 - s_m)
        need = s_m < lo_r ** 2 - 1e-15
        t2 = np.sqrt(np.maximum(lo_r ** 2 - s_m, 0.0))
        # far_z(k) = max(|-1 + k cell|, |-1 + k cell + width|) < t2
        k_lo2 = np.floor((1.0 - t2) / cell + 1e-12) + 1
        k_hi2 = np.ceil((1.0 + t2 - width) / cell - 1e-12) - 1
        k_lo2 = np.where(need, k_lo2, 1)
        k_hi2 = np.where(need, k_hi2, 0)

        bad_lo = np.maximum(np.maximum(k_lo1, k_lo2), 0)
        bad_hi = np.minimum(np.minimum(k_hi1, k_hi2), z_count - 1)
        bad_n = np.where(ok, np.maximum(bad_hi - bad_lo + 1, 0), 0)
        total += int(np.sum(near_n - bad_n))
    return total


# ---------------------------------------------------------------------------
# annular deformation
# ---------------------------------------------------------------------------

@dataclass
class DeformationRecord:
    input_surface: CubicalSurface
    center: np.ndarray
    radius: float
    eps: float
    delta: float
    j: int
    schedule: list[float]
    slice_measure: float
    t_pieces: list
    p_pieces: list
    output: CubicalSurface
    kappa: float
    n_eps: int
    gamma: float
    c1: float
    ff_record: ProjectionRecord = field(repr=False, default=None)
    slice_ref: list = field(default_factory=list, repr=False)
    bound_report: dict = field(default_factory=dict, repr=False)

    def t_measure(self) -> float:
        items = [q for q in self.t_pieces if q.dim == self.input_surface.m]
        return hausdorff_measure(items, self.input_surface.m) if items else 0.0

    def p_measure(self) -> float:
        items = [q for q in self.p_pieces if q.dim == self.input_surface.m]
        return hausdorff_measure(items, self.input_surface.m) if items else 0.0

    def check_bounds(self) -> dict:
        """Measured versions of the three quantitative items: the ribbon
        stays in the slice collar, its mass is controlled by the slice
        mass, and the cone mass is controlled by gamma r^m."""
        m = self.input_surface.m
        r, eps = self.radius, self.eps
        report = {}
        worst = 0.0
        slice_ref = [q.verts for q in self.slice_ref]
        ref = np.vstack(slice_ref) if slice_ref else np.atleast_2d(self.center)
        for q in self.t_pieces:
            for v in q.verts:
                d = float(np.min(np.linalg.norm(ref - v, axis=1)))
                worst = max(worst, d)
        report["t_in_collar"] = worst <= eps * r * (1 + 1e-9)
        report["t_collar_gap"] = worst
        report["t_mass"] = self.t_measure()
        report["t_mass_bound"] = report["t_mass"] <= \
            self.c1 * eps * r * self.slice_measure + 1e-12
        report["p_mass"] = self.p_measure()
        report["p_mass_bound"] = report["p_mass"] <= \
            self.gamma * r ** m + 1e-12
        return report

    def serialize(self) -> str:
        """All measured constants, stable field order, for regression locks."""
        buf = io.StringIO()
        c = " ".join(f"{v:.12g}" for v in self.center)
        buf.write(f"center {c}\n")
        buf.write(f"radius {self.radius:.12g}\n")
        buf.write(f"eps {self.eps:.12g}\n")
        buf.write(f"delta {self.delta:.12g}\n")
        buf.write(f"grid_level {self.j}\n")
        buf.write(f"kappa {self.kappa:.12g}\n")
        buf.write(f"n_eps {self.n_eps}\n")
        buf.write(f"gamma {self.gamma:.12g}\n")
        buf.write(f"c1 {self.c1:.12g}\n")
        buf.write(f"slice_mass {self.slice_measure:.12g}\n")
        buf.write(f"t_mass {self.t_measure():.12g}\n")
        buf.write(f"p_mass {self.p_measure():.12g}\n")
        buf.write(f"schedule {' '.join(f'{t:.12g}' for t in self.schedule)}\n")
        return buf.getvalue()


def _ribbon_pieces(ff: ProjectionRecord, p, r: float, delta: float, m: int):
    """Transition ribbon: sphere-normalized homotopy sweeps plus the radial
    drop from the sphere to the reduced radius."""
    p = np.asarray(p, dtype=float)

    def onto_sphere(v, radius):
        d = v - p
        nv = np.linalg.norm(d)
        if nv < 1e-300:
            return p + np.array([radius] + [0.0] * (len(p) - 1))
        return p + d * (radius / nv)

    ribbons = []

    def sweep(va, vb):
        # va, vb: matching vertex arrays of a piece before and after a move
        if len(va) == 1:
            ribbons.append(segment(va[0], vb[0]))
        elif len(va) == 2:
            ribbons.append(triangle(va[0], va[1], vb[0]))
            ribbons.append(triangle(va[1], vb[0], vb[1]))
        else:
            for i in range(len(va)):
                a0, a1 = va[i], va[(i + 1) % len(va)]
                b0, b1 = vb[i], vb[(i + 1) % len(vb)]
                ribbons.append(triangle(a0, a1, b0))
                ribbons.append(triangle(a1, b0, b1))

    for st in ff.stages:
        for pre, post, _root in st.pairs:
            va = np.asarray([onto_sphere(v, r) for v in pre.verts])
            vb = np.asarray([onto_sphere(v, r) for v in post.verts])
            sweep(va, vb)
    for t in ff.final:
        va = np.asarray([onto_sphere(v, r) for v in t.piece.verts])
        vb = np.asarray([onto_sphere(v, r * (1 - delta)) for v in t.piece.verts])
        sweep(va, vb)
    return [q for q in ribbons if q.dim == m and q.measure() > 1e-14]


def annular_deformation(x: CubicalSurface, p, r: float, eps: float,
                        ambient: AmbientSpace, max_retries: int = 6,
                        schedule=None) -> DeformationRecord:
    """Replace X inside B(p,r) by the cone approximation.

    Preconditions: r below the retraction radius at p, the inflated ball
    B(p, sqrt(n) r) misses the bounding set, and the sphere slice is
    (m-1)-dimensional with finite mass.  The bound-retry loop halves the
    annulus margin on failure, at most max_retries times.
    """
    p = np.asarray(p, dtype=float)
    m, n = x.m, x.n
    if r <= 0 or eps <= 0:
        raise DeformationError("need positive radius and accuracy")
    if r >= ambient.retraction_radius(p):
        raise DeformationError("radius exceeds the retraction radius at p")
    guard = math.sqrt(n) * r
    for piece in list(x.a_pieces) + [  # bounding set clearance
            None]:
        if piece is None:
            continue
        d = float(np.min(np.linalg.norm(piece.verts - p, axis=1)))
        if d <= guard:
            raise DeformationError(
                f"bounding set meets B(p, sqrt(n) r): distance {d:.3g}")
    for f in x.a_faces:
        c = f.corners()
        if float(np.min(np.linalg.norm(c - p, axis=1))) <= guard:
            raise DeformationError("bounding set meets B(p, sqrt(n) r)")

    br = restrict_ball(x, p, r)
    slice_pieces = [q for q in br.slice_pieces if q.dim == m - 1]
    if br.inside_measure <= 1e-14 and not slice_pieces:
        return DeformationRecord(x, p, float(r), float(eps), 0.0, 0, [],
                                 0.0, [], [], x, ambient.kappa, 0, 0.0, 1.0)
    slice_measure = br.slice_measure

    j = max(1, math.ceil(math.log2(4.0 * math.sqrt(n) / eps)))
    schedule = schedule or [1 - 2.0 ** -i for i in range(1, 9)]
    delta = eps / 4.0
    kappa = ambient.kappa
    n_eps = collar_face_count(n, m, j, eps)
    gamma = kappa ** m * math.sqrt(n) * n_eps * (eps / (2 * math.sqrt(n))) ** (m - 1)

    last_error = None
    for attempt in range(max_retries + 1):
        ff = ff_project(slice_pieces, p - r, 2 * r, j, m - 1,
                        FFConfig())
        wpieces = []
        for t in ff.final:
            verts = []
            for v in t.piece.verts:
                d = v - p
                nv = np.linalg.norm(d)
                verts.append(p + d * ((1 - delta) * r / max(nv, 1e-300)))
            wpieces.append(Piece(np.asarray(verts), t.piece.dim))
        p_pieces = list(cone(p, wpieces).pieces)
        t_pieces = _ribbon_pieces(ff, p, r, delta, m)

        outside = [q for q in br.outside if q.dim == m]
        out_pieces = outside + [q for q in t_pieces if q.dim == m] + \
            [q for q in p_pieces if q.dim == m]
        out_surface = reduce_surface(CubicalSurface(
            m, n, pieces=tuple(out_pieces), a_faces=x.a_faces,
            a_pieces=x.a_pieces))
        rec = DeformationRecord(x, p, float(r), float(eps), delta, j,
                                list(schedule), slice_measure, t_pieces,
                                p_pieces, out_surface, kappa, n_eps, gamma,
                                ff.c1, ff, slice_ref=slice_pieces)
        report = rec.check_bounds()
        if report["t_in_collar"] and report["t_mass_bound"] and \
                report["p_mass_bound"]:
            rec.bound_report = report
            return rec
        last_error = report
        delta /= 2.0
    raise DeformationError(f"bounds failed after retries: {last_error}")
