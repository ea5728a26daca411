"""Density ratios, regularity checks, and the quantitative monitors.

Mass profiles are sampled radial functions s -> H^m(X_k(p,s)) computed
with exact ball clipping; derivatives are central finite differences on
the radius lattice, and every inequality check carries its discretization
tolerance explicitly.  "Almost every radius" becomes "every sampled good
radius".
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .fragments import Piece, clip_box, point_to_piece_distance
from .grid import GridError
from .integrand import Integrand, evaluate_functional, unit_ball_volume
from .surface import CubicalSurface, hausdorff_distance, restrict_ball

__all__ = [
    "DensityProfile",
    "DensityConstants",
    "density_ratio",
    "profile_extract",
    "reifenberg_regular_check",
    "good_radii",
    "upper_density_verify",
    "UpperDensityReport",
    "tangent_cone_check",
    "semiregularity_certificate",
    "lower_semicontinuity_check",
    "annulus_series_bound",
    "rectifiability_monitor",
    "mass_derivative_chain_check",
]


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

@dataclass
class DensityProfile:
    """Radial mass data at one center for a family of surfaces."""

    center: np.ndarray
    radii: np.ndarray                 # increasing
    masses: np.ndarray                # (K, N)
    slice_masses: np.ndarray          # (K, N)
    m: int

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)
        self.masses = np.atleast_2d(np.asarray(self.masses, dtype=float))
        self.slice_masses = np.atleast_2d(np.asarray(self.slice_masses, dtype=float))
        if np.any(np.diff(self.radii) <= 0):
            raise GridError("radii must be strictly increasing")
        if np.any(np.diff(self.masses, axis=1) < -1e-9):
            raise GridError("mass profiles must be non-decreasing in the radius")

    @property
    def k_count(self) -> int:
        return self.masses.shape[0]

    def derivative(self) -> np.ndarray:
        """Central finite differences along the radius lattice."""
        return np.gradient(self.masses, self.radii, axis=1)

    def ratios(self) -> np.ndarray:
        return self.masses / self.radii[None, :] ** self.m

    def discretization_tol(self, k: int | None = None) -> float:
        """Scale of the finite-difference error: mass curvature times h."""
        h = float(np.diff(self.radii).max())
        mm = self.masses if k is None else self.masses[k: k + 1]
        if mm.shape[1] < 3:
            return h
        second = np.abs(np.diff(mm, n=2, axis=1)) / h ** 2
        return float(h * max(second.max(), 1.0))

    def serialize(self) -> str:
        buf = io.StringIO()
        buf.write("# radius  mass_k...  slice_k...\n")
        for i, r in enumerate(self.radii):
            row = [f"{r:.12g}"]
            row += [f"{v:.12g}" for v in self.masses[:, i]]
            row += [f"{v:.12g}" for v in self.slice_masses[:, i]]
            buf.write(" ".join(row) + "\n")
        return buf.getvalue()


def density_ratio(x: CubicalSurface, p, r: float, m: int | None = None) -> float:
    """H^m(X(p,r)) / r^m."""
    if r <= 0:
        raise GridError("radius must be positive")
    m = x.m if m is None else m
    br = restrict_ball(x, p, r)
    return br.inside_measure / r ** m


def profile_extract(surfaces, p, radii) -> DensityProfile:
    surfaces = list(surfaces)
    radii = np.asarray(sorted(radii), dtype=float)
    masses = np.zeros((len(surfaces), len(radii)))
    slices = np.zeros_like(masses)
    for k, x in enumerate(surfaces):
        for i, r in enumerate(radii):
            br = restrict_ball(x, p, float(r))
            masses[k, i] = br.inside_measure
            slices[k, i] = br.slice_measure
    m = surfaces[0].m if surfaces else 1
    return DensityProfile(np.asarray(p, dtype=float), radii, masses, slices, m)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityConstants:
    """The constant chain the engine audits evaluate against."""

    a: float
    b: float
    c: float                  # lower density constant
    scale_cutoff: float       # R
    c1: float
    gamma0: float
    mass_bound: float         # M
    infimum_estimate: float
    m: int
    d_p: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.scale_cutoff, self.c1,
                self.gamma0, self.mass_bound, self.d_p)
        if any((not math.isfinite(v)) or v <= 0 for v in vals):
            raise GridError("density constants must be positive and finite")
        if self.b < self.a:
            raise GridError("need a <= b")

    @property
    def big_k(self) -> float:
        return 2.0 * self.b / self.a

    @property
    def eps0(self) -> float:
        return 1.0 / (2.0 * self.c1 * self.m * self.big_k)

    @property
    def c_p(self) -> float:
        return max(self.mass_bound / (self.a * self.d_p ** self.m),
                   2.0 * self.big_k * self.gamma0)

    @property
    def c_mp(self) -> float:
        return 2.0 * self.c_p * self.m * self.b / self.a

    @property
    def alpha_m(self) -> float:
        return unit_ball_volume(self.m)

    def report(self) -> str:
        lines = [
            f"a {self.a:.12g}", f"b {self.b:.12g}", f"c {self.c:.12g}",
            f"R {self.scale_cutoff:.12g}", f"c1 {self.c1:.12g}",
            f"gamma0 {self.gamma0:.12g}", f"M {self.mass_bound:.12g}",
            f"infimum {self.infimum_estimate:.12g}",
            f"K {self.big_k:.12g}", f"eps0 {self.eps0:.12g}",
            f"c_p {self.c_p:.12g}", f"C_mp {self.c_mp:.12g}",
            f"alpha_m {self.alpha_m:.12g}",
        ]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reifenberg regularity
# ---------------------------------------------------------------------------

def _bounding_distance(x: CubicalSurface, p) -> float:
    items = list(x.a_pieces) + [None]
    best = math.inf
    for piece in x.a_pieces:
        best = min(best, point_to_piece_distance(p, piece))
    for f in x.a_faces:
        from .surface import face_to_piece
        best = min(best, point_to_piece_distance(p, face_to_piece(f)))
    return best


def reifenberg_regular_check(surfaces, c: float, scale_cutoff: float,
                             max_points: int = 24):
    """Deterministic sample of the density lower bound.

    For each surface index k >= 1, sample centers on face centroids and
    vertices, dyadic radii in (2^-k, R) with the ball clear of the
    bounding set; returns (ok, witness) with the first violating triple.
    """
    if c <= 0 or scale_cutoff <= 0:
        raise GridError("need positive constants")
    for k, x in enumerate(surfaces, start=1):
        pieces = [q for q in x.surface_pieces() if q.dim == x.m]
        centers = []
        for q in pieces:
            centers.append(q.centroid())
            centers.extend(q.verts)
        centers = centers[:max_points]
        radii = []
        r = scale_cutoff / 2.0
        while r > 2.0 ** -k:
            radii.append(r)
            r /= 2.0
        for p in centers:
            guard = _bounding_distance(x, p)
            for r in radii:
                if r >= guard:
                    continue
                ratio = density_ratio(x, p, r)
                if ratio < c - 1e-12:
                    return False, (k, p, r, ratio)
    return True, None


# ---------------------------------------------------------------------------
# good radii
# ---------------------------------------------------------------------------

def good_radii(profile: DensityProfile, diff_tol: float = 0.4,
               sphere_tol: float = 1e-6, avg_tol: float = 0.25,
               mu0_row: int = -1) -> list[float]:
    """Sampled radii passing the pointwise conditions: no sphere-mass atom
    of the limit-measure proxy, finite slice mass, two-sided
    differentiability of the mass, and slice-mass continuity.

    Tolerances are relative to the local profile scale; interior radii
    only (one-sided endpoints cannot certify differentiability).
    """
    r = profile.radii
    out = []
    h = np.diff(r)
    mu = profile.masses[mu0_row]
    # robust scales: a jump radius is an outlier against the profile's own
    # typical curvature (smooth curvature scales with the lattice step and
    # must not disqualify radii)
    second = np.abs(np.diff(mu, n=2))
    second_med = float(np.median(second)) if len(second) else 0.0
    slice_jumps = np.abs(np.diff(profile.slice_masses, axis=1))
    jump_med = float(np.median(slice_jumps)) if slice_jumps.size else 0.0
    quot_gaps = []
    for k in range(profile.k_count):
        mm = profile.masses[k]
        left = np.diff(mm)[:-1] / h[:-1]
        right = np.diff(mm)[1:] / h[1:]
        quot_gaps.append(np.abs(left - right))

    for i in range(1, len(r) - 1):
        ok = True
        if abs((mu[i + 1] - mu[i]) - (mu[i] - mu[i - 1])) > \
                sphere_tol + 4.0 * second_med + sphere_tol * max(mu[-1], 1.0):
            ok = False
        for k in range(profile.k_count):
            if not ok:
                break
            gap = quot_gaps[k][i - 1]
            mm = profile.masses[k]
            scale_k = max(abs(mm[i + 1] - mm[i - 1]) / (r[i + 1] - r[i - 1]), 1e-12)
            if gap > diff_tol * scale_k + 1e-12:
                ok = False
                break
            sl = profile.slice_masses[k]
            if not math.isfinite(sl[i]):
                ok = False
                break
            if abs(sl[i + 1] - sl[i]) > avg_tol * max(abs(sl[i]), 1.0) + 4.0 * jump_med:
                ok = False
                break
        if ok:
            out.append(float(r[i]))
    return out


# ---------------------------------------------------------------------------
# the upper-density differential inequality
# ---------------------------------------------------------------------------

@dataclass
class UpperDensityReport:
    eta: float
    hypothesis_ok: bool
    hypothesis_failures: list
    conclusion_value: float | None
    conclusion_ok: bool | None
    quadrature_gap: float
    indeterminate: bool

    @property
    def passed(self) -> bool:
        if self.indeterminate:
            return False
        if not self.hypothesis_ok:
            return True  # nothing asserted when the hypothesis fails
        return bool(self.conclusion_ok)


def upper_density_verify(profile: DensityProfile, eta: float, delta_schedule,
                         r_lo: float, r_hi: float, hypothesis_tol: float = 1e-6,
                         conclusion_tol: float = 0.01,
                         tail_fraction: float = 0.34,
                         min_samples: int = 6) -> UpperDensityReport:
    """Check the differential-inequality hypothesis on the profile family
    and, when it holds, assert the density conclusion at the inner radius.

    delta_schedule: iterable of (delta, first_index) pairs; radii where the
    ratio is below eta are exempt from the hypothesis.  The integration
    step is cross-checked by quadrature of d/dt (mass / t^m).
    """
    m = profile.m
    r = profile.radii
    sel = (r >= r_lo - 1e-12) & (r <= r_hi + 1e-12)
    if sel.sum() < min_samples:
        return UpperDensityReport(eta, False, [], None, None, math.inf, True)
    idx = np.nonzero(sel)[0]
    # hypothesis only where central differences represent the derivative
    hyp_idx = idx[(idx > 0) & (idx < len(r) - 1)]
    radii = r[sel]
    masses = profile.masses[:, sel]
    deriv_full = profile.derivative()
    ratios = masses / radii[None, :] ** m
    ratios_hyp = profile.masses[:, hyp_idx] / r[hyp_idx][None, :] ** m

    failures = []
    hypothesis_ok = True
    for delta, first_k in delta_schedule:
        for k in range(int(first_k), profile.k_count):
            need = ratios_hyp[k] >= eta - 1e-12
            ss = r[hyp_idx][need]
            lhs = profile.masses[k, hyp_idx][need]
            rhs = (ss / m) * deriv_full[k, hyp_idx][need] + delta
            bad = lhs >= rhs + hypothesis_tol
            if bad.any():
                bi = int(np.nonzero(bad)[0][0])
                failures.append((delta, k, float(ss[bi]),
                                 float(lhs[bi] - rhs[bi])))
                hypothesis_ok = False
    # the limsup premise at the outer radius: checked on the best tail
    # term, since the premise bounds a limsup (terms may approach from above)
    tail = max(1, int(math.ceil(profile.k_count * tail_fraction)))
    outer = ratios[-tail:, -1].min()
    if outer > eta + conclusion_tol:
        hypothesis_ok = False
        failures.append(("outer_ratio", None, float(radii[-1]), float(outer - eta)))

    conclusion_value = float(ratios[-tail:, 0].max())
    conclusion_ok = None
    if hypothesis_ok:
        conclusion_ok = conclusion_value <= eta + conclusion_tol

    # quadrature cross-check of the integrated ratio-derivative identity
    ratio_last = ratios[-1]
    dr = np.gradient(ratio_last, radii)
    integral = float(np.trapezoid(dr, radii))
    gap = abs(integral - (ratio_last[-1] - ratio_last[0]))

    return UpperDensityReport(eta, hypothesis_ok, failures,
                              conclusion_value, conclusion_ok, gap, False)


def brute_force_limsup(profile: DensityProfile, r: float,
                       tail_fraction: float = 0.34) -> float:
    """The direct evaluation the verifier must agree with."""
    i = int(np.argmin(np.abs(profile.radii - r)))
    tail = max(1, int(math.ceil(profile.k_count * tail_fraction)))
    return float((profile.masses[-tail:, i] / profile.radii[i] ** profile.m).max())


# ---------------------------------------------------------------------------
# tangent cones
# ---------------------------------------------------------------------------

def tangent_cone_check(x: CubicalSurface, p, plane, eps: float,
                       density_certificate=None, r_start: float = 1.0,
                       sweeps: int = 10, spacing: float = 0.01):
    """Smallest sweep radius whose clipped surface lies in the closed cone
    about the plane; (None, obstruction) when even the smallest fails.

    The density certificate is required (the containment statement is
    false without a lower bound); pass the (c, R) pair or any truthy
    object recording one.
    """
    if density_certificate is None:
        raise GridError("tangent_cone_check requires a density certificate")
    if not (0 < eps < 1):
        raise GridError("eps must lie in (0,1)")
    p = np.asarray(p, dtype=float)
    proj = plane.projector()
    last_pass = None
    obstruction = None
    r = r_start
    for _ in range(sweeps):
        br = restrict_ball(x, p, r)
        pts = []
        for q in br.inside:
            pts.append(q.sample_points(max(spacing, r / 40)))
        ok = True
        if pts:
            pts = np.vstack(pts)
            rel = pts - p
            tangential = rel @ proj.T
            off = np.linalg.norm(rel - tangential, axis=1)
            dist = np.linalg.norm(rel, axis=1)
            bad = off > eps * dist + 1e-9
            if bad.any():
                ok = False
                obstruction = pts[int(np.nonzero(bad)[0][0])]
        if ok:
            last_pass = r
        r /= 2.0
    if last_pass is None:
        return None, obstruction
    return last_pass, None


# ---------------------------------------------------------------------------
# semiregularity
# ---------------------------------------------------------------------------

def semiregularity_certificate(x: CubicalSurface, d: int, levels: int = 4,
                               spacing: float = 0.02, seed: int = 0):
    """Greedy ball-covering estimate of the covering constant: the largest
    observed (cover count) * (r / r')^d over dyadic radius pairs."""
    pts = x.sample_points(spacing, include_bounding=False)
    if len(pts) == 0:
        return 0.0, []
    rng = np.random.default_rng(seed)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diam = float(np.linalg.norm(hi - lo)) or 1.0
    witness = []
    best = 0.0
    from scipy.spatial import cKDTree
    tree = cKDTree(pts)
    centers = [0.5 * (lo + hi)] + \
        [pts[i] for i in rng.choice(len(pts), size=min(4, len(pts)), replace=False)]
    for xc in centers:
        for i in range(levels):
            r_big = diam / 2 ** i
            inside = pts[np.linalg.norm(pts - xc, axis=1) <= r_big]
            if len(inside) == 0:
                continue
            for jj in range(1, levels + 1):
                r_small = r_big / 2 ** jj
                if r_small < 2 * spacing:
                    break
                count = _greedy_cover_count(inside, r_small)
                score = count * (r_small / r_big) ** d
                if score > best:
                    best = score
                    witness = [(tuple(np.round(xc, 6)), r_big, r_small, count)]
    return best, witness


def _greedy_cover_count(pts: np.ndarray, r: float) -> int:
    remaining = pts
    count = 0
    while len(remaining):
        c = remaining[0]
        keep = np.linalg.norm(remaining - c, axis=1) > r
        remaining = remaining[keep]
        count += 1
    return count


# ---------------------------------------------------------------------------
# lower semicontinuity
# ---------------------------------------------------------------------------

def _clip_to_region(x: CubicalSurface, boxes) -> CubicalSurface:
    """Surface clipped to a union of disjoint axis boxes (exact)."""
    if boxes is None:
        return x
    pieces = []
    for q in x.surface_pieces():
        for lo, hi in boxes:
            part = clip_box(q, lo, hi)
            if part is not None and (part.dim == 0 or part.measure() > 1e-14):
                pieces.append(part)
    return CubicalSurface(x.m, x.n, pieces=tuple(
        p for p in pieces if p.dim == x.m))


def lower_semicontinuity_check(sequence, limit: CubicalSurface, f: Integrand,
                               region=None, convergence_tol: float = 0.25,
                               tail_fraction: float = 0.5,
                               spacing: float = 0.05):
    """liminf F(X_k cap V) - F(X_0 cap V), with convergence verified first.

    region: list of (lo, hi) disjoint axis boxes, or None for everywhere.
    """
    sequence = list(sequence)
    if not sequence:
        raise GridError("empty sequence")
    limit_pts = limit.sample_points(spacing, include_bounding=False)
    dists = []
    for x in sequence:
        pts = x.sample_points(spacing, include_bounding=False)
        dists.append(hausdorff_distance(pts, limit_pts))
    if dists[-1] > convergence_tol:
        raise GridError(
            f"sequence does not converge to the limit (d_H {dists[-1]:.3g})")
    vals = [evaluate_functional(f, _clip_to_region(x, region)) for x in sequence]
    limit_val = evaluate_functional(f, _clip_to_region(limit, region))
    tail = max(1, int(math.ceil(len(vals) * tail_fraction)))
    liminf = min(vals[-tail:])
    return liminf - limit_val


def annulus_series_bound(c_mp: float, a: float, eps: float, r: float, m: int,
                         terms: int = 200):
    """Geometric-series mass of nested annuli versus its closed form.

    Returns (partial_sum, closed_form): the total measure of balls whose
    every annulus A(p, eps, (1-eps)^i r) carries mass a*C*eps*((1-eps)^i r)^m.
    """
    partial = sum(a * c_mp * eps * ((1 - eps) ** i * r) ** m
                  for i in range(terms))
    closed = a * c_mp * eps / (1 - (1 - eps) ** m) * r ** m
    return partial, closed


# ---------------------------------------------------------------------------
# density-bound monitor
# ---------------------------------------------------------------------------

def rectifiability_monitor(x: CubicalSurface, constants: DensityConstants,
                           sample_radii=None, max_points: int = 16,
                           weight: Integrand | None = None):
    """Sampled two-sided density bounds against the recorded constants.

    The limit measure is approximated by the F-weighted measure of the
    surface itself; lower and upper densities come from the three smallest
    sampled radii and are flagged as estimates.
    """
    alpha = constants.alpha_m
    m = constants.m
    radii = sorted(sample_radii or
                   [constants.scale_cutoff / 2 ** i for i in range(3, 0, -1)])
    radii = radii[:3]
    entries = []
    violations = []
    pieces = [q for q in x.surface_pieces() if q.dim == m]
    pts = [q.centroid() for q in pieces][:max_points]
    for p in pts:
        guard = _bounding_distance(x, p)
        d_p = min(guard, constants.d_p)
        c_p = max(constants.mass_bound / (constants.a * d_p ** m),
                  2 * constants.big_k * constants.gamma0)
        ratios = []
        for r in radii:
            if r >= guard:
                continue
            br = restrict_ball(x, p, r)
            mu = br.inside_measure
            if weight is not None:
                clipped = CubicalSurface(x.m, x.n, pieces=tuple(
                    q for q in br.inside if q.dim == m))
                mu = evaluate_functional(weight, clipped)
            else:
                mu = constants.a * mu  # f == a on every plane
            ratios.append(mu / (alpha * r ** m))
        if not ratios:
            continue
        theta_lower = min(ratios)
        theta_upper = max(ratios)
        lower_bound = constants.a * constants.c / alpha
        upper_bound = constants.b * c_p / alpha
        ok = (theta_lower >= lower_bound - 1e-9) and \
            (theta_upper <= upper_bound + 1e-9)
        entries.append((tuple(np.round(p, 6)), theta_lower, theta_upper,
                        lower_bound, upper_bound, ok))
        if not ok:
            violations.append(entries[-1])
    return entries, violations


def mass_derivative_chain_check(triples, constants: DensityConstants,
                                delta: float, tol: float = 1e-9):
    """Validate the inequality chain on engine-emitted (s, mass, dmass)
    triples: the deformation bound implies the differential inequality
    whenever the density ratio clears 2 K gamma0."""
    k_const = constants.big_k
    g0 = constants.gamma0
    m = constants.m
    slack = delta * constants.mass_bound / constants.a
    report = []
    for s, mass, dmass in triples:
        first = mass <= k_const * g0 * s ** m + (s / (2 * m)) * dmass + slack + tol
        ratio = mass / s ** m
        second = True
        if ratio >= 2 * k_const * g0:
            second = mass <= (s / m) * dmass + 2 * slack + tol
        report.append((s, first, second))
    return report
