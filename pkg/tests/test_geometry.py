import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from shapely.affinity import rotate, translate
from shapely.geometry import Polygon, box

from scene_arbiter.geometry import (Polyline, points_in_polygon, points_in_rect, rect_corners, rects_overlap,
                                    to_local, wrap_angle)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_wrap_angle_range_and_equivalence(theta):
    w = wrap_angle(theta)
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)


def test_wrap_angle_pi_maps_to_minus_pi():
    assert wrap_angle(math.pi) == -math.pi
    assert wrap_angle(-math.pi) == -math.pi
    assert wrap_angle(0.0) == 0.0


def test_to_local_rotation():
    lon, lat = to_local(1.0, 1.0, 0.0, 0.0, math.pi / 2)
    assert lon == pytest.approx(1.0) and lat == pytest.approx(-1.0)


def test_polyline_projection_and_extrapolation():
    line = Polyline([(0, 0), (10, 0), (10, 10)])
    assert line.length == pytest.approx(20.0)
    assert line.point_at(15.0) == pytest.approx((10.0, 5.0))
    assert line.point_at(-5.0) == pytest.approx((-5.0, 0.0))
    s, lat, _ = line.project(5.0, 2.0)
    assert s == pytest.approx(5.0) and lat == pytest.approx(2.0)
    s, lat, _ = line.project(12.0, 5.0)
    assert s == pytest.approx(15.0) and lat == pytest.approx(-2.0)
    assert line.distance_to(5.0, -3.0) == pytest.approx(3.0)
    assert line.heading_at(12.0) == pytest.approx(math.pi / 2)


def _shapely_rect(x, y, h, length, width):
    r = box(-length / 2, -width / 2, length / 2, width / 2)
    return translate(rotate(r, h, origin=(0, 0), use_radians=True), x, y)


def test_rect_corners_match_shapely():
    c = rect_corners(3.0, -2.0, 0.7, 4.5, 1.8)
    assert Polygon(c).symmetric_difference(_shapely_rect(3.0, -2.0, 0.7, 4.5, 1.8)).area < 1e-9


def test_rects_overlap_matches_shapely():
    rng = np.random.default_rng(11)
    n = 2000
    a = np.column_stack([rng.uniform(-6, 6, n), rng.uniform(-6, 6, n), rng.uniform(-math.pi, math.pi, n)])
    b = np.column_stack([rng.uniform(-6, 6, n), rng.uniform(-6, 6, n), rng.uniform(-math.pi, math.pi, n)])
    got = rects_overlap(a, b, (4.5, 1.8), (3.0, 2.0))
    want = np.array([_shapely_rect(*a[i], 4.5, 1.8).intersects(_shapely_rect(*b[i], 3.0, 2.0)) for i in range(n)])
    assert np.array_equal(got, want)


def test_points_in_rect_and_polygon():
    px = np.array([0.0, 2.0, 2.4, 0.0])
    py = np.array([0.0, 0.0, 0.0, 1.0])
    assert points_in_rect(px, py, 0.0, 0.0, 0.0, 4.5, 1.8).tolist() == [True, True, False, False]
    square = [(0, 0), (2, 0), (2, 2), (0, 2)]
    assert points_in_polygon(np.array([1.0, 3.0]), np.array([1.0, 1.0]), square).tolist() == [True, False]
