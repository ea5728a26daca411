import itertools

import numpy as np
import pytest

from plateaulab.grid import DyadicGrid, Face, GridError, face_count


def brute_force_faces(n, j, d):
    """Enumeration oracle: collect d-faces of every subcube of [0,1]^n."""
    s = 2 ** j
    seen = set()
    for cell in itertools.product(range(s), repeat=n):
        for axes in itertools.combinations(range(n), d):
            free = [i for i in range(n) if i not in axes]
            for offs in itertools.product((0, 1), repeat=len(free)):
                anchor = list(cell)
                for i, o in zip(free, offs):
                    anchor[i] += o
                seen.add((tuple(anchor), axes))
    return seen


def test_subdivide_trivial_whole_cube():
    g = DyadicGrid((0.0, 0.0), 1.0, 0)
    faces = g.subdivide(2)
    assert len(faces) == 1
    assert faces[0] == g.cube


def test_subdivide_edges_2d():
    g = DyadicGrid((0.0, 0.0), 1.0, 1)
    assert len(g.subdivide(1)) == 12


def test_subdivide_squares_3d():
    g = DyadicGrid((0.0, 0.0, 0.0), 1.0, 1)
    faces = g.subdivide(2)
    assert len(faces) == 36
    s = 2
    assert len(faces) == 3 * s ** 2 * (s + 1)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("j", [0, 1, 2, 3])
def test_subdivide_counts_match_enumeration(n, j):
    if n * j > 8:
        pytest.skip("enumeration oracle too large")
    g = DyadicGrid(tuple(0.0 for _ in range(n)), 1.0, j)
    for d in range(n + 1):
        faces = g.subdivide(d)
        assert len(faces) == face_count(n, j, d)
        oracle = brute_force_faces(n, j, d)
        got = {(f.anchor, f.axes) for f in faces}
        assert got == oracle


def test_subdivide_out_of_range():
    g = DyadicGrid((0.0, 0.0), 1.0, 1)
    with pytest.raises(GridError):
        g.subdivide(3)
    with pytest.raises(GridError):
        g.subdivide(-1)


def test_cells_are_interior_disjoint_and_cover():
    g = DyadicGrid((-1.0, -1.0), 2.0, 2)
    cells = g.cells()
    assert len(cells) == 2 ** (2 * 2)
    total = sum(c.measure(2) for c in cells)
    assert total == pytest.approx(4.0)
    centers = {tuple(c.center()) for c in cells}
    assert len(centers) == len(cells)


def test_boundary_consistency():
    # each (d+1)-face's boundary faces lie in the d-skeleton
    g = DyadicGrid((0.0, 0.0, 0.0), 1.0, 1)
    for d in range(3):
        sk = g.skeleton(d)
        for f in g.subdivide(d + 1):
            for bf in f.boundary_faces():
                assert bf in sk


def test_face_refine_and_containment():
    f = Face(0, (0, 0), (0, 1))
    kids = f.refine()
    assert len(kids) == 4
    assert sum(k.measure(2) for k in kids) == pytest.approx(f.measure(2))
    for k in kids:
        assert f.contains_face(k)
        assert not k.contains_face(f)


def test_face_geometry():
    f = Face(1, (1, 2, -1), (0, 2))
    assert f.side == 0.5
    np.testing.assert_allclose(f.min_corner(), [0.5, 1.0, -0.5])
    np.testing.assert_allclose(f.max_corner(), [1.0, 1.0, 0.0])
    assert f.measure() == 0.25
    assert f.measure(1) == 0.0
    assert len(f.corners()) == 4
    assert f.contains_point([0.75, 1.0, -0.25])
    assert not f.contains_point([0.75, 1.1, -0.25])


def test_non_dyadic_cube_rejected():
    with pytest.raises(GridError):
        DyadicGrid((0.0, 0.0), 3.0, 1)
    with pytest.raises(GridError):
        DyadicGrid((0.3, 0.0), 1.0, 4)


def test_grid_from_center():
    g = DyadicGrid.from_center((0.0, 0.0), 2.0, 1)
    assert g.corner == (-1.0, -1.0)
    assert g.subcube_side == 1.0
    assert g.cell_index((0.5, -0.5)) == (1, 0)
