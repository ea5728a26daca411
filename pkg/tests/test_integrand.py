import math

import numpy as np
import pytest

from plateaulab.fragments import polygon, segment
from plateaulab.grid import DyadicGrid, Face
from plateaulab.integrand import (
    AlmgrenEstimate,
    EllipticityPreconditionError,
    Integrand,
    IntegrandContractError,
    TabulatedIntegrand,
    TangentPlane,
    almgren_ellipticity_test,
    almgren_envelope,
    axis_weighted_integrand,
    constant_integrand,
    ellipticity_test,
    evaluate_functional,
    plane_disk,
    quadratic_normal_integrand,
    unit_ball_volume,
)
from plateaulab.surface import CubicalSurface


def test_tangent_plane_validation():
    TangentPlane(np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        TangentPlane(np.array([[1.0, 1.0]]))


def test_tangent_plane_span_invariance():
    rng = np.random.default_rng(0)
    f = quadratic_normal_integrand(1.0, 2.0)
    u = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 1.0, 0.0])
    base = TangentPlane(np.array([u, v]))
    val = f([0, 0, 0], base)
    for _ in range(5):
        th = rng.uniform(0, 2 * math.pi)
        u2 = math.cos(th) * u + math.sin(th) * v
        v2 = -math.sin(th) * u + math.cos(th) * v
        rotated = TangentPlane(np.array([u2, v2]))
        assert f([0, 0, 0], rotated) == pytest.approx(val)


def test_integrand_contract_enforced():
    bad = Integrand(lambda p, t: 5.0, 1.0, 2.0)
    with pytest.raises(IntegrandContractError):
        bad([0, 0], TangentPlane(np.array([[1.0, 0.0]])))


def unit_square_surface():
    return CubicalSurface.from_faces(2, 3, [Face(0, (0, 0, 0), (0, 1))])


def test_area_integrand_equals_measure():
    x = unit_square_surface()
    f = constant_integrand(1.0)
    assert evaluate_functional(f, x) == pytest.approx(x.measure())


def test_constant_two():
    x = unit_square_surface()
    assert evaluate_functional(constant_integrand(2.0), x) == pytest.approx(2.0)


def test_quadratic_normal_piecewise_sum():
    # xy-square (normal z) plus xz-square (normal y): 1 + (nu_z)^2 gives 2 + 1
    faces = [Face(0, (0, 0, 0), (0, 1)), Face(0, (0, 0, 0), (0, 2))]
    x = CubicalSurface.from_faces(2, 3, faces)
    f = quadratic_normal_integrand(1.0, 1.0, axis=2)
    assert evaluate_functional(f, x) == pytest.approx(3.0)


def test_functional_bounds_random_surfaces():
    rng = np.random.default_rng(7)
    f = quadratic_normal_integrand(1.0, 2.0)
    for _ in range(10):
        pieces = []
        for _ in range(rng.integers(1, 6)):
            base = rng.uniform(-1, 1, size=3)
            e1 = rng.uniform(-1, 1, size=3)
            e2 = rng.uniform(-1, 1, size=3)
            if np.linalg.norm(np.cross(e1, e2)) < 1e-3:
                continue
            pieces.append(polygon([base, base + e1, base + e1 + e2, base + e2]))
        if not pieces:
            continue
        x = CubicalSurface(2, 3, pieces=tuple(pieces))
        val = evaluate_functional(f, x)
        mass = x.measure()
        assert f.a * mass - 1e-9 <= val <= f.b * mass + 1e-9


def test_functional_additive_and_translation_invariant():
    f = quadratic_normal_integrand(1.0, 1.5)
    x = unit_square_surface()
    shifted = CubicalSurface(2, 3, pieces=(polygon(
        [[5, 5, 2], [6, 5, 2], [6, 6, 2], [5, 6, 2]]),))
    both = CubicalSurface(2, 3, faces=x.faces, pieces=shifted.pieces)
    assert evaluate_functional(f, both) == pytest.approx(
        evaluate_functional(f, x) + evaluate_functional(f, shifted))


def test_axis_weighted_values():
    f = axis_weighted_integrand([1.0, 3.0])
    horizontal = TangentPlane(np.array([[1.0, 0.0]]))
    vertical = TangentPlane(np.array([[0.0, 1.0]]))
    diag = TangentPlane(np.array([[1.0, 1.0]]) / math.sqrt(2))
    assert f([0, 0], horizontal) == 1.0
    assert f([0, 0], vertical) == 3.0
    assert f([0, 0], diag) == 3.0  # off-axis defaults to max weight


def test_tabulated_interpolation():
    # linear-in-x table, independent of plane angle
    xs = np.array([0.0, 1.0])
    ys = np.array([0.0, 1.0])
    ang = np.array([0.0, math.pi / 2, math.pi])
    vals = np.zeros((2, 2, 3))
    for i, xv in enumerate(xs):
        vals[i, :, :] = 1.0 + xv
    tab = TabulatedIntegrand([xs, ys], ang, vals).as_integrand()
    plane = TangentPlane(np.array([[1.0, 0.0]]))
    assert tab([0.25, 0.5], plane) == pytest.approx(1.25)
    assert tab([1.0, 0.0], plane) == pytest.approx(2.0)


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


# -- ellipticity --------------------------------------------------------------

def test_ellipticity_disk_against_itself():
    f = constant_integrand(1.0)
    plane = TangentPlane(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).T[:2])
    plane = TangentPlane(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    p, r, eps = np.zeros(3), 0.5, 0.1
    disk = plane_disk(p, plane, r, segments=512)
    rep = ellipticity_test(f, p, plane, r, [disk], eps)
    assert rep.margin == pytest.approx(eps * math.pi * r * r, rel=1e-3)
    assert not rep.violated


def grid_path_surface(edges, a_pts):
    return CubicalSurface.from_faces(1, 2, edges)


def test_ellipticity_brute_force_grid_competitors():
    # f == 1, m=1, n=2: all level-3 spanning edge paths inside the ball cost
    # at least the straight diameter
    import itertools

    f = constant_integrand(1.0)
    plane = TangentPlane(np.array([[1.0, 0.0]]))
    p, r, eps = np.zeros(2), 0.5, 0.05
    # competitors: monotone lattice paths from (-r,0) to (r,0) at level 3
    # inside the ball, plus the straight diameter
    h = 0.125
    riser = lambda k: abs(k) * h
    margins = []
    competitors = []
    for profile in itertools.product((-1, 0, 1), repeat=4):
        yy, pts = 0.0, [np.array([-r, 0.0])]
        ok = True
        for i, dz in enumerate(profile):
            x0 = -r + i * 2 * r / 4
            x1 = -r + (i + 1) * 2 * r / 4
            yy2 = yy + dz * h
            if i == 3:
                yy2 = 0.0
            mid = np.array([x0, yy2])
            end = np.array([x1, yy2])
            if np.linalg.norm(mid) > r + 1e-9 or np.linalg.norm(end) > r + 1e-9:
                ok = False
                break
            pts.extend([mid, end])
            yy = yy2
        if not ok:
            continue
        segs = [segment(pts[i], pts[i + 1]) for i in range(len(pts) - 1)
                if np.linalg.norm(pts[i + 1] - pts[i]) > 1e-12]
        competitors.append(CubicalSurface(1, 2, pieces=tuple(segs)))
    rep = ellipticity_test(f, p, plane, r, competitors, eps)
    assert rep.margin >= 0  # the straight diameter minimizes length


def test_ellipticity_staircase_violation():
    # f cheap on horizontal planes only: a tilted disk is beaten by an
    # axis-aligned staircase, a witnessed non-ellipticity
    def fn(p, plane):
        nu = plane.normal()
        return 1.0 if abs(nu[2]) > 0.999 else 10.0

    f = Integrand(fn, 1.0, 10.0, name="horizontal_cheap")
    u = np.array([math.cos(math.pi / 4), 0.0, math.sin(math.pi / 4)])
    v = np.array([0.0, 1.0, 0.0])
    tilted = TangentPlane(np.array([u, v]))
    p, r, eps = np.zeros(3), 0.4, 0.5
    # staircase competitor: horizontal treads and vertical risers filling
    # the tilted disk's boundary circle, built from thin quads
    k = 64
    treads = []
    ts = np.linspace(0, 1, k, endpoint=False)
    for t0, t1 in zip(ts, ts[1:] .tolist() + [1.0]):
        # piecewise graph z(x) following the tilted plane, y-extruded
        x0, x1 = (t0 - 0.5) * 2 * r / math.sqrt(2), (t1 - 0.5) * 2 * r / math.sqrt(2)
        z0, z1 = x0, x1
        w0 = math.sqrt(max(r * r - 2 * x0 * x0, 0.0))
        w1 = math.sqrt(max(r * r - 2 * x1 * x1, 0.0))
        w = min(w0, w1)
        if w < 1e-6:
            continue
        treads.append(polygon([[x0, -w, z0], [x1, -w, z0], [x1, w, z0], [x0, w, z0]]))
        treads.append(polygon([[x1, -w, z0], [x1, -w, z1], [x1, w, z1], [x1, w, z0]]))
    z = CubicalSurface(2, 3, pieces=tuple(treads))
    rep = ellipticity_test(f, p, tilted, r, [z], eps,
                           boundary_tol=0.2,
                           class_check=lambda s: True)
    assert rep.margin < 0  # violation witnessed


def test_ellipticity_boundary_precondition():
    f = constant_integrand(1.0)
    plane = TangentPlane(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    p, r = np.zeros(3), 0.5
    off = plane_disk(np.array([0.3, 0.0, 0.0]), plane, r, segments=64)
    with pytest.raises(EllipticityPreconditionError):
        ellipticity_test(f, p, plane, r, [off], 0.1)


def test_almgren_constant_ratio():
    plane = TangentPlane(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    p, r = np.zeros(3), 0.5
    disk = plane_disk(p, plane, r, segments=256)
    # X: shallow tent over the same boundary
    k = 256
    ts = np.linspace(0, 2 * math.pi, k, endpoint=False)
    ring = np.stack([r * np.cos(ts), r * np.sin(ts), np.zeros(k)], axis=1)
    apex = np.array([0.0, 0.0, 0.2])
    from plateaulab.fragments import triangle
    tris = [triangle(apex, ring[i], ring[(i + 1) % k]) for i in range(k)]
    x = CubicalSurface(2, 3, pieces=tuple(tris))

    for c in (1.0, 2.5):
        f = constant_integrand(c)
        est = almgren_ellipticity_test(f, p, disk, x)
        assert not est.indeterminate
        assert est.ratio == pytest.approx(c, rel=1e-9)
        assert almgren_envelope(f, p, disk, [x]) == pytest.approx(c, rel=1e-9)


def test_almgren_indeterminate_on_equal_mass():
    plane = TangentPlane(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    p, r = np.zeros(3), 0.5
    disk = plane_disk(p, plane, r, segments=256)
    f = constant_integrand(1.0)
    est = almgren_ellipticity_test(f, p, disk, disk)
    assert est.indeterminate
