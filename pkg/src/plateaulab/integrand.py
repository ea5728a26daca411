"""Anisotropic integrands and numerical ellipticity probes.

An integrand is a bounded measurable density f(p, T) on points times
unoriented m-planes.  Built-in families cover the lab's needs: constant,
quadratic-in-normal, axis-weighted (deliberately non-elliptic, to make
staircase phenomena visible), and tabulated values with multilinear
interpolation.  The ellipticity probes sample the defining inequality on
caller-supplied competitors; they witness violations, they never certify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fragments import Piece, ball_clip_measure, polygon, segment
from .surface import CubicalSurface, hausdorff_measure

__all__ = [
    "TangentPlane",
    "Integrand",
    "IntegrandContractError",
    "EllipticityPreconditionError",
    "constant_integrand",
    "quadratic_normal_integrand",
    "axis_weighted_integrand",
    "TabulatedIntegrand",
    "evaluate_functional",
    "plane_disk",
    "ellipticity_test",
    "ellipticity_sweep",
    "almgren_ellipticity_test",
    "almgren_envelope",
    "unit_ball_volume",
]

_FRAME_TOL = 1e-10


class IntegrandContractError(ValueError):
    """The density escaped its declared bounds [a, b]."""


class EllipticityPreconditionError(ValueError):
    """A competitor failed the boundary or spanning precondition."""


@dataclass(frozen=True)
class TangentPlane:
    """An unoriented element of Gr(m, n), stored as an orthonormal m-frame."""

    frame: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.frame, dtype=float))
        object.__setattr__(self, "frame", f)
        gram = f @ f.T
        if not np.allclose(gram, np.eye(len(f)), atol=_FRAME_TOL):
            raise ValueError("tangent frame is not orthonormal within 1e-10")

    @property
    def m(self) -> int:
        return self.frame.shape[0]

    @property
    def n(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        """Projection onto the span; the frame-independent description."""
        return self.frame.T @ self.frame

    def normal(self) -> np.ndarray:
        """Unit normal, defined for hypersurface planes (m = n-1) up to sign."""
        if self.m != self.n - 1:
            raise ValueError("normal defined only for m = n-1")
        u, s, vt = np.linalg.svd(self.frame)
        return vt[-1]

    @classmethod
    def from_piece(cls, piece: Piece) -> "TangentPlane":
        return cls(piece.frame())

    @classmethod
    def span(cls, *vectors) -> "TangentPlane":
        mat = np.asarray(vectors, dtype=float)
        q, r = np.linalg.qr(mat.T)
        keep = np.abs(np.diag(r)) > 1e-12
        return cls(q.T[: len(keep)][keep])


@dataclass(frozen=True)
class Integrand:
    """Density f with declared bounds 0 < a <= f <= b, checked on every call."""

    fn: Callable[[np.ndarray, TangentPlane], float] = field(compare=False)
    a: float
    b: float
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.a <= self.b):
            raise ValueError("need 0 < a <= b")

    def __call__(self, p, plane: TangentPlane) -> float:
        v = float(self.fn(np.asarray(p, dtype=float), plane))
        if v < self.a - 1e-12 or v > self.b + 1e-12:
            raise IntegrandContractError(
                f"integrand {self.name} returned {v} outside [{self.a}, {self.b}]")
        return v


def constant_integrand(c: float = 1.0) -> Integrand:
    return Integrand(lambda p, t: c, c, c, name=f"constant({c})")


def quadratic_normal_integrand(base: float = 1.0, weight: float = 1.0,
                               axis: int = -1) -> Integrand:
    """f = base + weight * (normal component along the given axis)^2.

    Defined for hypersurface planes.
    """

    def fn(p, plane):
        nu = plane.normal()
        a = axis % plane.n
        return base + weight * nu[a] ** 2

    return Integrand(fn, base, base + max(weight, 0.0),
                     name=f"quadratic_normal({base},{weight})")


def axis_weighted_integrand(weights: Sequence[float], off_axis: float | None = None,
                            tol: float = 1e-7) -> Integrand:
    """Piecewise density favouring axis-aligned planes.

    A plane spanned (within tol) by coordinate axes S costs the mean of
    the weights over S; every other plane costs off_axis, which defaults
    to max(weights).  Not elliptic by design.
    """
    w = np.asarray(weights, dtype=float)
    off = float(off_axis) if off_axis is not None else float(w.max())
    lo = min(float(w.min()), off)
    hi = max(float(w.max()), off)

    def fn(p, plane):
        proj = plane.projector()
        diag = np.diag(proj)
        offdiag = proj - np.diag(diag)
        if np.abs(offdiag).max() > tol or np.abs(diag * (1 - diag)).max() > tol:
            return off
        spanned = np.where(diag > 0.5)[0]
        if len(spanned) != plane.m:
            return off
        return float(w[spanned].mean())

    return Integrand(fn, lo, hi, name=f"axis_weighted({list(w)})")


class TabulatedIntegrand:
    """User integrand on a (point-grid x plane-grid) lattice.

    Plane coordinates: the direction angle in [0, pi) for m=1, n=2, or the
    normal's spherical angles for hypersurfaces in R^3.  Values are
    interpolated multilinearly; queries outside the lattice clamp.
    """

    def __init__(self, point_axes: Sequence[np.ndarray], plane_axis: np.ndarray,
                 values: np.ndarray, name: str = "tabulated"):
        self.point_axes = [np.asarray(ax, dtype=float) for ax in point_axes]
        self.plane_axis = np.asarray(plane_axis, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.name = name
        if self.values.shape != tuple(len(ax) for ax in self.point_axes) + (len(self.plane_axis),):
            raise ValueError("table shape mismatch")

    def plane_coordinate(self, plane: TangentPlane) -> float:
        if plane.m == 1 and plane.n == 2:
            u = plane.frame[0]
            return math.atan2(u[1], u[0]) % math.pi
        nu = plane.normal()
        if nu[-1] < 0 or (nu[-1] == 0 and nu[0] < 0):
            nu = -nu
        return math.acos(np.clip(nu[-1], -1, 1))

    def __call__(self, p, plane: TangentPlane) -> float:
        p = np.asarray(p, dtype=float)
        coords = list(p[: len(self.point_axes)]) + [self.plane_coordinate(plane)]
        axes = self.point_axes + [self.plane_axis]
        idx, frac = [], []
        for c, ax in zip(coords, axes):
            i = int(np.clip(np.searchsorted(ax, c) - 1, 0, len(ax) - 2))
            t = 0.0 if ax[i + 1] == ax[i] else (c - ax[i]) / (ax[i + 1] - ax[i])
            idx.append(i)
            frac.append(float(np.clip(t, 0.0, 1.0)))
        val = 0.0
        for corner in range(2 ** len(idx)):
            w, sel = 1.0, []
            for k in range(len(idx)):
                bit = (corner >> k) & 1
                w *= frac[k] if bit else (1 - frac[k])
                sel.append(idx[k] + bit)
            val += w * float(self.values[tuple(sel)])
        return val

    def as_integrand(self) -> Integrand:
        return Integrand(self, float(self.values.min()), float(self.values.max()),
                         name=self.name)


# ---------------------------------------------------------------------------
# functional evaluation
# ---------------------------------------------------------------------------

def _weighted_elements(x: CubicalSurface):
    """(centroid, plane, resolved_measure) triples for the surface part.

    When coplanar fragments overlap, each group's raw measures are scaled
    so the group total equals the exact union measure.  With no overlap
    this is the identity.
    """
    pieces = [p for p in x.surface_pieces() if p.dim == x.m and p.measure() > 1e-12]
    if not pieces:
        return
    raw = sum(p.measure() for p in pieces)
    resolved = hausdorff_measure(pieces, x.m)
    scale = 1.0 if raw <= 0 else resolved / raw
    for p in pieces:
        yield p.centroid(), TangentPlane.from_piece(p), p.measure() * scale


def evaluate_functional(f: Integrand, x: CubicalSurface) -> float:
    """F^m(X \\ A): density at face centroids times resolved face measure."""
    total = 0.0
    for centroid, plane, w in _weighted_elements(x):
        total += f(centroid, plane) * w
    return total


def unit_ball_volume(m: int) -> float:
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def plane_disk(p, plane: TangentPlane, r: float, segments: int = 64) -> CubicalSurface:
    """The flat disk E(p,r) as a surface (chordal polygon for m=2)."""
    p = np.asarray(p, dtype=float)
    if plane.m == 1:
        u = plane.frame[0]
        return CubicalSurface(1, plane.n, pieces=(segment(p - r * u, p + r * u),))
    if plane.m == 2:
        u, v = plane.frame
        verts = [p + r * (math.cos(t) * u + math.sin(t) * v)
                 for t in np.linspace(0, 2 * math.pi, segments, endpoint=False)]
        return CubicalSurface(2, plane.n, pieces=(polygon(verts),))
    raise ValueError("plane_disk implemented for m <= 2")


# ---------------------------------------------------------------------------
# ellipticity probes
# ---------------------------------------------------------------------------

def _pierce_class_check(z: CubicalSurface, p, plane: TangentPlane, r: float) -> bool:
    """Computable stand-in for 'no retraction onto the boundary sphere':
    the competitor must meet the normal segment through p (m = n-1) or,
    for m=1, connect the two boundary points of the diameter.
    """
    p = np.asarray(p, dtype=float)
    pieces = z.surface_pieces()
    if plane.m == 1:
        u = plane.frame[0]
        ends = [p - r * u, p + r * u]
        # connectivity of the endpoint pair through the segment graph
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components
        verts: list[np.ndarray] = []

        def vid(q):
            for i, w in enumerate(verts):
                if np.linalg.norm(w - q) < 1e-9:
                    return i
            verts.append(q)
            return len(verts) - 1

        edges = []
        for piece in pieces:
            if piece.dim != 1:
                continue
            edges.append((vid(piece.verts[0]), vid(piece.verts[1])))
        try:
            i0, i1 = vid(ends[0]), vid(ends[1])
        except Exception:
            return False
        if not edges:
            return False
        rows = [e[0] for e in edges]
        cols = [e[1] for e in edges]
        g = coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(len(verts), len(verts)))
        _, labels = connected_components(g, directed=False)
        return labels[i0] == labels[i1]
    nu = plane.normal()
    probe = segment(p - r * nu, p + r * nu)
    from .spanning import pieces_intersect
    return any(pieces_intersect(probe, q) for q in pieces if q.dim == plane.m)


@dataclass
class EllipticityReport:
    p: np.ndarray
    r: float
    eps: float
    f_at_plane: float
    disk_mass: float
    margins: list[float]
    margin: float

    @property
    def violated(self) -> bool:
        return self.margin < 0


def ellipticity_test(f: Integrand, p, plane: TangentPlane, r: float,
                     competitors: Sequence[CubicalSurface], eps: float,
                     ambient=None, boundary_tol: float = 1e-6,
                     class_check: Callable | None = None) -> EllipticityReport:
    """Sample the elliptic inequality at (p, plane, r, eps).

    Each competitor Z must live in the closed ball, agree with the flat
    disk on the boundary sphere, and carry the boundary class (proxy
    check).  The returned margin is the minimum over competitors of
    F(Z inside C) + b H(Z outside C) - (f(p,E) - eps) H(E(p,r)); a
    negative margin is a witnessed violation.
    """
    p = np.asarray(p, dtype=float)
    m = plane.m
    disk_mass = unit_ball_volume(m) * r ** m
    f_val = f(p, plane)
    check = class_check or (lambda z: _pierce_class_check(z, p, plane, r))

    margins = []
    for z in competitors:
        _check_boundary_condition(z, p, plane, r, boundary_tol)
        if not check(z):
            raise EllipticityPreconditionError(
                "competitor does not carry the boundary sphere class")
        inside_val, outside_mass = _split_by_ambient(f, z, ambient)
        margins.append(inside_val + f.b * outside_mass - (f_val - eps) * disk_mass)
    margin = min(margins) if margins else math.inf
    return EllipticityReport(p, float(r), float(eps), f_val, disk_mass, margins,
                             margin)


def _check_boundary_condition(z: CubicalSurface, p, plane, r, tol):
    """Z must live in the closed ball and trace the disk's boundary on the
    sphere (both inclusions, within tolerance)."""
    slack = max(tol, 0.02 * r)
    for piece in z.surface_pieces():
        worst = float(np.linalg.norm(piece.verts - p, axis=1).max())
        if worst > r + slack:
            raise EllipticityPreconditionError(
                f"competitor piece leaves the ball by {worst - r:.3g}")
    # sphere trace of Z: sampled surface points on a thin shell
    pts = z.sample_points(spacing=max(r / 40.0, 1e-3), include_bounding=False)
    radii = np.linalg.norm(pts - p, axis=1)
    shell_tol = max(r / 50.0, slack / 5.0)
    shell = pts[np.abs(radii - r) <= shell_tol]
    target = _disk_boundary_points(p, plane, r)
    if len(shell) == 0:
        raise EllipticityPreconditionError("competitor misses the boundary sphere")
    from scipy.spatial import cKDTree
    tree = cKDTree(shell)
    gap = tree.query(target)[0].max()
    if gap > max(slack, r / 20.0):
        raise EllipticityPreconditionError(
            f"competitor does not cover the disk boundary (gap {gap:.3g})")
    off = cKDTree(target).query(shell)[0].max()
    if off > max(slack, r / 10.0):
        raise EllipticityPreconditionError(
            f"competitor sphere trace strays off the disk boundary by {off:.3g}")


def _disk_boundary_points(p, plane, r, k: int = 256) -> np.ndarray:
    if plane.m == 1:
        u = plane.frame[0]
        return np.array([p - r * u, p + r * u])
    u, v = plane.frame
    ts = np.linspace(0, 2 * math.pi, k, endpoint=False)
    return np.array([p + r * (math.cos(t) * u + math.sin(t) * v) for t in ts])


def _split_by_ambient(f: Integrand, z: CubicalSurface, ambient):
    """(F(Z inside C), H(Z outside C)); everything is inside when C is None."""
    if ambient is None:
        return evaluate_functional(f, z), 0.0
    inside_val, outside_mass = 0.0, 0.0
    for centroid, plane, w in _weighted_elements(z):
        if ambient.contains(centroid):
            inside_val += f(centroid, plane) * w
        else:
            outside_mass += w
    return inside_val, outside_mass


def ellipticity_sweep(f: Integrand, p, plane: TangentPlane, radii, competitors_fn,
                      eps: float, **kw) -> list[EllipticityReport]:
    """Run the test over dyadic radii; competitors_fn(r) supplies the field."""
    return [ellipticity_test(f, p, plane, r, competitors_fn(r), eps, **kw)
            for r in radii]


# ---------------------------------------------------------------------------
# flat-disk comparison estimate
# ---------------------------------------------------------------------------

@dataclass
class AlmgrenEstimate:
    ratio: float | None
    indeterminate: bool
    functional_gap: float
    mass_gap: float


def almgren_ellipticity_test(f: Integrand, p, disk: CubicalSurface,
                             x: CubicalSurface, tol: float = 1e-9,
                             boundary_tol: float = 1e-6) -> AlmgrenEstimate:
    """Ratio (F_p(X) - F_p(D)) / (H(X) - H(D)) with f frozen at p.

    X must contain the disk boundary as a point set; a denominator below
    tol yields an indeterminate flag rather than an error.
    """
    p = np.asarray(p, dtype=float)
    frozen = Integrand(lambda q, t: f(p, t), f.a, f.b, name=f"{f.name}@p")
    _check_contains_disk_boundary(x, disk, boundary_tol)
    fgap = evaluate_functional(frozen, x) - evaluate_functional(frozen, disk)
    mgap = x.measure() - disk.measure()
    if abs(mgap) < tol:
        return AlmgrenEstimate(None, True, fgap, mgap)
    return AlmgrenEstimate(fgap / mgap, False, fgap, mgap)


def _check_contains_disk_boundary(x: CubicalSurface, disk: CubicalSurface, tol):
    from .fragments import point_to_piece_distance

    boundary = disk.pieces[0].verts
    pieces = x.surface_pieces()
    if not pieces:
        raise EllipticityPreconditionError("competitor has no surface part")
    worst = 0.0
    for q in boundary:
        d = min(point_to_piece_distance(q, piece) for piece in pieces)
        worst = max(worst, d)
    if worst > max(tol, 0.02):
        raise EllipticityPreconditionError(
            f"competitor does not contain the disk boundary (gap {worst:.3g})")


def almgren_envelope(f: Integrand, p, disk: CubicalSurface,
                     competitors: Sequence[CubicalSurface], **kw) -> float:
    """Empirical lower envelope for the comparison constant e(p)."""
    ratios = []
    for x in competitors:
        est = almgren_ellipticity_test(f, p, disk, x, **kw)
        if not est.indeterminate:
            ratios.append(est.ratio)
    return min(ratios) if ratios else math.inf
