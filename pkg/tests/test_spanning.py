import itertools
import math

import numpy as np
import pytest

from plateaulab.fragments import polygon, segment, triangle
from plateaulab.grid import DyadicGrid, Face, GridError
from plateaulab.spanning import (
    CubicalComplex,
    SpanningCondition,
    axiom_check,
    gf2_nullspace,
    gf2_rank,
    gf2_solve,
    homology_rank,
    loop_pieces,
    pieces_intersect,
    read_condition,
    refine_chain,
    refine_cochain,
    spans_algebraic,
    spans_linking,
    write_condition,
)
from plateaulab.surface import CubicalSurface


def square_boundary(level=0, anchor=(0, 0)):
    """The four edges of a lattice square."""
    f = Face(level, anchor, (0, 1))
    return f.boundary_faces()


def filled_square(level=0, anchor=(0, 0)):
    return [Face(level, anchor, (0, 1))]


# -- gf2 --------------------------------------------------------------------

def test_gf2_rank_and_solve():
    a = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
    assert gf2_rank(a) == 2
    x = gf2_solve(a, np.array([1, 0], dtype=np.uint8))
    assert x is not None
    assert np.array_equal(a @ x % 2, [1, 0])
    assert gf2_solve(np.array([[1, 1], [1, 1]], np.uint8), np.array([1, 0], np.uint8)) is None


def test_gf2_nullspace():
    a = np.array([[1, 1, 0], [0, 0, 1]], dtype=np.uint8)
    ns = gf2_nullspace(a)
    assert len(ns) == 1
    assert not (a @ ns[0] % 2).any()


def test_gf2_solve_against_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(30):
        rows, cols = rng.integers(1, 6), rng.integers(1, 7)
        a = rng.integers(0, 2, size=(rows, cols)).astype(np.uint8)
        b = rng.integers(0, 2, size=rows).astype(np.uint8)
        brute = None
        for bits in itertools.product((0, 1), repeat=cols):
            v = np.array(bits, dtype=np.uint8)
            if np.array_equal(a @ v % 2, b):
                brute = v
                break
        got = gf2_solve(a, b)
        assert (got is None) == (brute is None)
        if got is not None:
            assert np.array_equal(a @ got % 2, b)


# -- complexes and homology ---------------------------------------------------

def test_boundary_of_boundary_zero():
    g = DyadicGrid((0.0, 0.0, 0.0), 1.0, 1)
    k = CubicalComplex(g.subdivide(3))
    for d in (1, 2, 3):
        bd = k.boundary_matrix(d)
        bdd = k.boundary_matrix(d - 1) if d >= 2 else None
        if bdd is not None and bd.size and bdd.size:
            assert not (bdd @ bd % 2).any()


def test_homology_square_boundary():
    k = CubicalComplex(square_boundary())
    rank, basis = homology_rank(k, 1)
    assert rank == 1
    assert len(basis) == 1
    v = k.chain_vector(basis[0], 1)
    assert k.is_cycle(v, 1)


def test_homology_two_squares():
    k = CubicalComplex(square_boundary() + square_boundary(anchor=(3, 0)))
    rank, _ = homology_rank(k, 1)
    assert rank == 2
    # two components: reduced H_0 has rank 1
    rank0, _ = homology_rank(k, 0)
    assert rank0 == 1


def test_homology_filled_square():
    k = CubicalComplex(filled_square())
    rank, _ = homology_rank(k, 1)
    assert rank == 0


def test_homology_cube_surface():
    g = DyadicGrid((0.0, 0.0, 0.0), 1.0, 0)
    k = CubicalComplex(g.subdivide(2))  # the six walls: a 2-sphere
    assert homology_rank(k, 0)[0] == 0
    assert homology_rank(k, 1)[0] == 0
    assert homology_rank(k, 2)[0] == 1


# -- algebraic spanning -------------------------------------------------------

def ambient_square(j=1):
    g = DyadicGrid((0.0, 0.0), 2.0, j)
    return CubicalComplex(g.cells())


def test_spans_l1_filled_vs_hollow():
    a = CubicalComplex(square_boundary())
    c = ambient_square()
    cond = SpanningCondition("algebraic", 2, 2, l1=[square_boundary()])
    x_filled = CubicalSurface.from_faces(2, 2, filled_square(), a_faces=square_boundary())
    assert spans_algebraic(x_filled, a, cond, c).spans
    x_hollow = CubicalComplex(square_boundary())
    res = spans_algebraic(x_hollow, a, cond, c)
    assert not res.spans
    assert res.detail.startswith("L1")


def test_spans_l1_connectivity():
    # m=1: the class [p]+[q] dies iff p and q are joined inside X
    p, q = Face(0, (0, 0), ()), Face(0, (2, 0), ())
    a = CubicalComplex([p, q])
    c = ambient_square(j=1)
    cond = SpanningCondition("algebraic", 1, 2, l1=[[p, q]])
    path = [Face(0, (0, 0), (0,)), Face(0, (1, 0), (0,))]
    x = CubicalSurface.from_faces(1, 2, path, a_faces=[p, q])
    assert spans_algebraic(x, a, cond, c).spans
    broken = CubicalSurface.from_faces(1, 2, path[:1], a_faces=[p, q])
    assert not spans_algebraic(broken, a, cond, c).spans


def test_spans_l3_realization():
    # L3: X must realize the wall class of a hollow 3d shell
    g = DyadicGrid((0.0, 0.0, 0.0), 1.0, 0)
    shell = g.subdivide(2)
    c = CubicalComplex(shell)
    a = CubicalComplex([Face(0, (0, 0, 0), ())])
    cond = SpanningCondition("algebraic", 2, 3, l3=[shell])
    x_full = CubicalComplex(shell)
    assert spans_algebraic(x_full, a, cond, c).spans
    x_partial = CubicalComplex(shell[:3] + [Face(0, (0, 0, 0), ())])
    assert not spans_algebraic(x_partial, a, cond, c).spans


def test_spans_l2_cohomology():
    # A = two points, L2 = the cocycle supported on one point:
    # restriction image shrinks when the points are joined in X
    p, q = Face(0, (0, 0), ()), Face(0, (1, 0), ())
    a = CubicalComplex([p, q])
    c = ambient_square()
    lam = [p]
    cond = SpanningCondition("algebraic", 1, 2, l2=[lam])
    joined = CubicalSurface.from_faces(1, 2, [Face(0, (0, 0), (0,))], a_faces=[p, q])
    assert spans_algebraic(joined, a, cond, c).spans
    apart = CubicalComplex([p, q])
    assert not spans_algebraic(apart, a, cond, c).spans


def test_spans_l4_kernel():
    # C = hollow shell, L4 = its top class; X = all walls keeps the class,
    # X missing a wall kills it (the class restricts to a coboundary)
    g = DyadicGrid((0.0, 0.0, 0.0), 1.0, 0)
    shell = g.subdivide(2)
    c = CubicalComplex(shell)
    a = CubicalComplex([Face(0, (0, 0, 0), ())])
    cond = SpanningCondition("algebraic", 2, 3, l4=[[shell[0]]])
    assert spans_algebraic(CubicalComplex(shell), a, cond, c).spans
    missing = CubicalComplex(shell[1:] + [Face(0, (0, 0, 0), ())])
    assert not spans_algebraic(missing, a, cond, c).spans


def test_spans_precondition_a_in_x():
    p, q = Face(0, (0, 0), ()), Face(0, (2, 0), ())
    a = CubicalComplex([p, q])
    c = ambient_square()
    cond = SpanningCondition("algebraic", 1, 2, l1=[[p, q]])
    x = CubicalComplex([Face(0, (0, 1), (0,))])
    with pytest.raises(GridError):
        spans_algebraic(x, a, cond, c)


def exhaustive_chain_solvable(k: CubicalComplex, target_faces, d):
    """Brute force over all d-chains: is the target a boundary?"""
    faces = k.faces(d)
    target = k.chain_vector(target_faces, d - 1)
    bd = k.boundary_matrix(d)
    for bits in itertools.product((0, 1), repeat=len(faces)):
        v = np.array(bits, dtype=np.uint8)
        if np.array_equal(bd @ v % 2, target):
            return True
    return False


def test_l1_against_exhaustive_search():
    # random small edge sets: linear algebra agrees with 2^k enumeration
    rng = np.random.default_rng(11)
    g = DyadicGrid((0.0, 0.0), 1.0, 1)
    edges = g.subdivide(1)
    p, q = Face(1, (0, 0), ()), Face(1, (2, 2), ())
    a = CubicalComplex([p, q])
    c = CubicalComplex(g.cells())
    cond = SpanningCondition("algebraic", 1, 2, l1=[[p, q]])
    for _ in range(12):
        chosen = [e for e in edges if rng.random() < 0.45]
        k = CubicalComplex(chosen + [p, q])
        fast = spans_algebraic(k, a, cond, c).spans
        slow = exhaustive_chain_solvable(k, [p, q], 1)
        assert fast == slow


def test_refinement_invariance():
    p, q = Face(0, (0, 0), ()), Face(0, (2, 0), ())
    a = CubicalComplex([p, q])
    c = ambient_square()
    cond = SpanningCondition("algebraic", 1, 2, l1=[[p, q]])
    path = [Face(0, (0, 0), (0,)), Face(0, (1, 0), (0,))]
    x = CubicalSurface.from_faces(1, 2, path, a_faces=[p, q])
    res0 = spans_algebraic(x, a, cond, c).spans

    fine_faces = refine_chain(path)
    ka = CubicalComplex([p, q], level=1)
    kc = CubicalComplex([f for f in c.by_dim.get(2, [])], level=None)
    kc_f = CubicalComplex(DyadicGrid((0.0, 0.0), 2.0, 2).cells())
    xf = CubicalComplex(fine_faces + [f.at_level(1)[0] for f in (p, q)])
    res1 = spans_algebraic(xf, ka, cond.refined(), kc_f).spans
    assert res0 == res1


def test_refine_cochain_pairing():
    # evaluation of a cochain on a chain survives joint refinement
    rng = np.random.default_rng(5)
    g = DyadicGrid((0.0, 0.0), 1.0, 1)
    edges = g.subdivide(1)
    for _ in range(10):
        chain = [e for e in edges if rng.random() < 0.5]
        coch = [e for e in edges if rng.random() < 0.5]
        pairing = len(set(chain) & set(coch)) % 2
        fine_chain = set(refine_chain(chain))
        fine_coch = set(refine_cochain(coch))
        assert len(fine_chain & fine_coch) % 2 == pairing


def test_refine_cochain_keeps_cocycles():
    g = DyadicGrid((0.0, 0.0), 1.0, 1)
    k = CubicalComplex(g.cells())
    kf = CubicalComplex(g.cells(), level=k.level + 1)
    # a "cut" cocycle in degree 1: the right column of x-spanning edges
    cut = [f for f in g.subdivide(1) if f.axes == (0,) and f.anchor[0] == 1]
    v = k.chain_vector(cut, 1)
    assert k.is_cocycle(v, 1)
    vf = kf.cochain_vector(refine_cochain(cut), 1)
    assert kf.is_cocycle(vf, 1)


# -- linking ------------------------------------------------------------------

def flat_disk_surface(r=1.0, z=0.0, k=16):
    ts = np.linspace(0, 2 * math.pi, k, endpoint=False)
    ring = np.stack([r * np.cos(ts), r * np.sin(ts), np.full(k, z)], axis=1)
    center = np.array([0.0, 0.0, z])
    tris = [triangle(center, ring[i], ring[(i + 1) % k]) for i in range(k)]
    a = loop_pieces(ring)
    return CubicalSurface(2, 3, pieces=tuple(tris), a_pieces=tuple(a))


def meridian_loop(k=16, rho=0.3):
    # loop threading the hole of the boundary circle: up through a point
    # near the center, closing far outside.  Links A = unit circle once.
    pts = np.array([[rho, 0.0, -2.0], [rho, 0.0, 2.0],
                    [3.0, 0.0, 2.0], [3.0, 0.0, -2.0]])
    return loop_pieces(pts)


def test_linking_disk_spans():
    x = flat_disk_surface()
    cond = SpanningCondition("linking", 2, 3, test_cycles=[meridian_loop()])
    assert spans_linking(x, cond).spans


def test_linking_annulus_fails():
    # thin annulus around the boundary circle misses the inner test loop
    k = 32
    ts = np.linspace(0, 2 * math.pi, k, endpoint=False)
    outer = np.stack([np.cos(ts), np.sin(ts), np.zeros(k)], axis=1)
    inner = 0.8 * outer
    tris = []
    for i in range(k):
        j = (i + 1) % k
        tris.append(triangle(outer[i], outer[j], inner[i]))
        tris.append(triangle(inner[i], outer[j], inner[j]))
    x = CubicalSurface(2, 3, pieces=tuple(tris), a_pieces=tuple(loop_pieces(outer)))
    cond = SpanningCondition("linking", 2, 3,
                             test_cycles=[meridian_loop(rho=0.2)])
    res = spans_linking(x, cond)
    assert not res.spans
    assert res.witness == 0


def test_linking_hemisphere_spans():
    from geomfixtures import hemisphere_surface

    x = hemisphere_surface(r=1.0, k=16, rows=8)
    cond = SpanningCondition("linking", 2, 3, test_cycles=[meridian_loop()])
    assert spans_linking(x, cond).spans


def test_linking_monotone():
    x = flat_disk_surface()
    bigger = CubicalSurface(2, 3, pieces=x.pieces + (triangle(
        [3, 3, 3], [4, 3, 3], [3, 4, 3]),), a_pieces=x.a_pieces)
    cond = SpanningCondition("linking", 2, 3, test_cycles=[meridian_loop()])
    assert spans_linking(x, cond).spans
    assert spans_linking(bigger, cond).spans


def test_linking_test_cycle_touching_a_rejected():
    x = flat_disk_surface()
    bad_cycle = loop_pieces(np.array([[1.0, 0, 0], [1.5, 0, 0], [1.5, 0.5, 0]]))
    cond = SpanningCondition("linking", 2, 3, test_cycles=[bad_cycle])
    with pytest.raises(GridError):
        spans_linking(x, cond)


def test_pieces_intersect_exact_touch():
    # segment touching a triangle exactly at a vertex counts (closed sets)
    t = triangle([0, 0, 0], [1, 0, 0], [0, 1, 0])
    s = segment([0, 0, 0], [0, 0, 1])
    assert pieces_intersect(s, t)
    s2 = segment([0, 0, 1e-12], [0, 0, 1])
    assert not pieces_intersect(s2, t)


def test_pieces_intersect_2d():
    a = segment([0, 0], [1, 1])
    b = segment([0, 1], [1, 0])
    assert pieces_intersect(a, b)
    c = segment([2, 2], [3, 3])
    assert not pieces_intersect(a, c)


def test_alexander_duality_corpus():
    # matched algebraic / linking instances agree: A = two points in the
    # plane, dual test cycle = a small loop separating them
    p, q = Face(0, (0, 0), ()), Face(0, (2, 0), ())
    a = CubicalComplex([p, q])
    c = ambient_square()
    alg = SpanningCondition("algebraic", 1, 2, l1=[[p, q]])
    loop = loop_pieces(np.array([[0.5, -3.0], [0.5, 3.0], [-3.0, 3.0], [-3.0, -3.0]]))
    link = SpanningCondition("linking", 1, 2, test_cycles=[loop])
    fixtures = []
    path = [Face(0, (0, 0), (0,)), Face(0, (1, 0), (0,))]
    fixtures.append((CubicalSurface.from_faces(1, 2, path, a_faces=[p, q]), True))
    # a stub that stays on p's side of the separating loop
    stub = [Face(0, (0, 0), (1,))]
    fixtures.append((CubicalSurface.from_faces(1, 2, stub, a_faces=[p, q]), False))
    detour = [Face(0, (0, 0), (1,)), Face(0, (0, 1), (0,)), Face(0, (1, 1), (0,)),
              Face(0, (2, 0), (1,))]
    fixtures.append((CubicalSurface.from_faces(1, 2, detour, a_faces=[p, q]), True))
    for x, expect in fixtures:
        assert spans_algebraic(x, a, alg, c).spans == expect
        assert spans_linking(x, link).spans == expect


# -- axioms -------------------------------------------------------------------

def test_axiom_check_identity():
    x = flat_disk_surface()
    cond = SpanningCondition("linking", 2, 3, test_cycles=[meridian_loop()])
    rep = axiom_check(cond, x, image=x)
    assert rep.passed


def test_axiom_check_punctured_sequence_honest():
    # terms fail (hole), the limit disk spans; the checker reports both
    def punctured(hole):
        k = 24
        ts = np.linspace(0, 2 * math.pi, k, endpoint=False)
        outer = np.stack([np.cos(ts), np.sin(ts), np.zeros(k)], axis=1)
        inner = hole * outer
        tris = []
        for i in range(k):
            j = (i + 1) % k
            tris.append(triangle(outer[i], outer[j], inner[i]))
            tris.append(triangle(inner[i], outer[j], inner[j]))
        return CubicalSurface(2, 3, pieces=tuple(tris),
                              a_pieces=tuple(loop_pieces(outer)))

    cond = SpanningCondition("linking", 2, 3, test_cycles=[meridian_loop(rho=0.05)])
    seq = [punctured(1.0 / kk) for kk in (2, 4, 8)]
    rep = axiom_check(cond, flat_disk_surface(), sequence=seq,
                      limit=flat_disk_surface(k=24))
    term_entries = [e for e in rep.entries if e[0].startswith("term")]
    assert all(not ok for _, ok, _ in term_entries)
    limit_entry = [e for e in rep.entries if e[0].startswith("limit")]
    assert limit_entry[0][1]


# -- io -----------------------------------------------------------------------

def test_condition_roundtrip_algebraic():
    p, q = Face(0, (0, 0), ()), Face(0, (2, 0), ())
    cond = SpanningCondition("algebraic", 1, 2, l1=[[p, q]])
    text = write_condition(cond, a_faces=[p, q], c_faces=ambient_square().faces(2))
    back, a_faces, c_faces = read_condition(text)
    assert back.kind == "algebraic"
    assert back.l1 == [[p, q]]
    assert sorted(a_faces) == sorted([p, q])
    assert len(c_faces) == 4


def test_condition_roundtrip_linking():
    cond = SpanningCondition("linking", 2, 3, test_cycles=[meridian_loop()])
    text = write_condition(cond)
    back, _, _ = read_condition(text)
    assert len(back.test_cycles) == 1
    assert len(back.test_cycles[0]) == 4
    for orig, rt in zip(cond.test_cycles[0], back.test_cycles[0]):
        np.testing.assert_allclose(orig.verts, rt.verts)
