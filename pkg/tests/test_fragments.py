import math

import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from plateaulab.fragments import (
    Piece,
    ball_clip_measure,
    ball_clip_pieces,
    circle_arcs_in_polygon,
    clip_box,
    clip_halfspace,
    disk_polygon_area,
    point_piece,
    polygon,
    segment,
    simplex_measure,
    triangle,
)


def unit_square_piece(z=None):
    v = [[0, 0], [1, 0], [1, 1], [0, 1]]
    if z is not None:
        v = [[x, y, z] for x, y in v]
    return polygon(v)


def test_simplex_measures():
    assert simplex_measure(np.array([[0.0, 0.0], [3.0, 4.0]])) == pytest.approx(5.0)
    assert simplex_measure(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])) == pytest.approx(0.5)
    assert simplex_measure(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0.0]])) == 0.0


def test_piece_measures_and_centroid():
    sq = unit_square_piece()
    assert sq.measure() == pytest.approx(1.0)
    np.testing.assert_allclose(sq.centroid(), [0.5, 0.5])
    seg = segment([0, 0, 0], [0, 0, 2])
    assert seg.measure() == pytest.approx(2.0)
    assert point_piece([1.0, 2.0]).measure() == 0.0


def test_frame_orthonormal():
    tri = triangle([0, 0, 0], [2, 0, 0], [2, 3, 0])
    f = tri.frame()
    np.testing.assert_allclose(f @ f.T, np.eye(2), atol=1e-12)
    # spans the xy-plane
    assert abs(f[0][2]) < 1e-12 and abs(f[1][2]) < 1e-12


def test_clip_halfspace_polygon():
    sq = unit_square_piece()
    lo, hi = clip_halfspace(sq, [1.0, 0.0], 0.5)
    assert lo.measure() == pytest.approx(0.5)
    assert hi.measure() == pytest.approx(0.5)
    assert lo.measure() + hi.measure() == pytest.approx(sq.measure())


def test_clip_halfspace_segment_exact_coordinate():
    s = segment([0, 0], [1, 1])
    lo, hi = clip_halfspace(s, [1.0, 0.0], 0.25, set_coord=0, set_value=0.25)
    assert lo.verts[1][0] == 0.25
    assert lo.measure() + hi.measure() == pytest.approx(s.measure())


def test_clip_box():
    sq = unit_square_piece()
    inner = clip_box(sq, [0.25, 0.25], [0.75, 0.75])
    assert inner.measure() == pytest.approx(0.25)
    assert clip_box(sq, [2, 2], [3, 3]) is None


def shapely_disk_area(verts2d, c, r, quad=2048):
    return Polygon(verts2d).intersection(Point(c).buffer(r, quad_segs=quad)).area


@pytest.mark.parametrize("c,r", [
    ((0.5, 0.5), 0.25),
    ((0.5, 0.5), 0.8),
    ((0.0, 0.0), 0.5),
    ((1.2, 0.5), 0.4),
    ((0.5, 0.5), 3.0),
    ((-0.5, -0.5), 0.3),
])
def test_disk_polygon_area_against_polygonal_oracle(c, r):
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    exact = disk_polygon_area(verts, c, r)
    approx = shapely_disk_area(verts, c, r)
    assert exact == pytest.approx(approx, abs=1e-5)


def test_disk_polygon_area_random_triangles():
    rng = np.random.default_rng(0)
    for _ in range(25):
        verts = rng.uniform(-1, 1, size=(3, 2))
        c = rng.uniform(-1, 1, size=2)
        r = rng.uniform(0.1, 1.5)
        exact = disk_polygon_area(verts, c, r)
        approx = shapely_disk_area(verts, c, r)
        assert exact == pytest.approx(approx, abs=2e-5)


def test_circle_arcs_full_and_empty():
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    arcs = circle_arcs_in_polygon(verts, (0.5, 0.5), 0.25)
    assert sum(b - a for a, b in arcs) == pytest.approx(2 * math.pi)
    assert circle_arcs_in_polygon(verts, (0.5, 0.5), 5.0) == []


def test_circle_arc_partial():
    # circle centered at the square corner: a quarter lies inside
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    arcs = circle_arcs_in_polygon(verts, (0.0, 0.0), 0.5)
    assert sum(b - a for a, b in arcs) == pytest.approx(math.pi / 2)


def test_ball_clip_measure_square_through_center():
    # unit square through the ball center: interior area = pi r^2
    sq = unit_square_piece(z=0.0)
    inside, arc = ball_clip_measure(sq, [0.5, 0.5, 0.0], 0.25)
    assert inside == pytest.approx(math.pi / 16, rel=1e-9)
    assert arc == pytest.approx(2 * math.pi * 0.25, rel=1e-9)


def test_ball_clip_measure_offset_plane():
    # ball center off the plane: radius shrinks to a chordal disk
    sq = polygon([[-2, -2, 0], [2, -2, 0], [2, 2, 0], [-2, 2, 0.0]])
    inside, arc = ball_clip_measure(sq, [0.0, 0.0, 0.3], 0.5)
    r2 = math.sqrt(0.5 ** 2 - 0.3 ** 2)
    assert inside == pytest.approx(math.pi * r2 ** 2, rel=1e-9)
    assert arc == pytest.approx(2 * math.pi * r2, rel=1e-9)


def test_ball_clip_measure_segment():
    s = segment([-1, 0], [1, 0])
    inside, crossings = ball_clip_measure(s, [0.0, 0.0], 0.5)
    assert inside == pytest.approx(1.0)
    assert crossings == 2


def test_ball_clip_pieces_partition_measure():
    sq = unit_square_piece(z=0.0)
    p, r = [0.5, 0.5, 0.0], 0.25
    ins, outs, slc = ball_clip_pieces(sq, p, r, arc_segments=512)
    m_in = sum(q.measure() for q in ins)
    m_out = sum(q.measure() for q in outs)
    assert m_in + m_out == pytest.approx(1.0, rel=1e-6)
    assert m_in == pytest.approx(math.pi / 16, rel=1e-4)
    slice_len = sum(q.measure() for q in slc)
    assert slice_len == pytest.approx(2 * math.pi * 0.25, rel=1e-3)


def test_ball_clip_pieces_segment():
    s = segment([-1.0, 0.0], [1.0, 0.0])
    ins, outs, slc = ball_clip_pieces(s, [0.0, 0.0], 0.5)
    assert sum(q.measure() for q in ins) == pytest.approx(1.0)
    assert sum(q.measure() for q in outs) == pytest.approx(1.0)
    assert len(slc) == 2


def test_sample_points_cover():
    sq = unit_square_piece()
    pts = sq.sample_points(0.3)
    assert len(pts) > 8
    assert pts.min() >= -1e-12 and pts.max() <= 1 + 1e-12
