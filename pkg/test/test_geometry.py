import math

import numpy as np
import pytest

from epcfusion.errors import DegenerateGeometry
from epcfusion.geometry import (FootprintPolygon, build_spatial_features, footprint_area, normalize_boundary,
                                principal_orientation, resample_boundary)

UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def rotate(points, angle, centre=(0.0, 0.0)):
    c, s = math.cos(angle), math.sin(angle)
    return [(c * x - s * y + centre[0], s * x + c * y + centre[1]) for x, y in points]


def rectangle(width=2.0, height=1.0):
    w, h = width / 2, height / 2
    return [(-w, -h), (w, -h), (w, h), (-w, h)]


def test_resample_unit_square_corners():
    points = resample_boundary(FootprintPolygon.from_points('sq', UNIT_SQUARE), 4)
    np.testing.assert_allclose(points, UNIT_SQUARE, atol=1e-12)


def test_resample_unit_square_midpoints():
    points = resample_boundary(FootprintPolygon.from_points('sq', UNIT_SQUARE), 8)
    expected = [(0, 0), (0.5, 0), (1, 0), (1, 0.5), (1, 1), (0.5, 1), (0, 1), (0, 0.5)]
    np.testing.assert_allclose(points, expected, atol=1e-12)


def test_resample_equal_edges_returns_vertices():
    hexagon = [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]
    points = resample_boundary(FootprintPolygon.from_points('hex', hexagon), 6)
    np.testing.assert_allclose(points, hexagon, atol=1e-12)


def test_closing_vertex_is_dropped():
    polygon = FootprintPolygon.from_points('sq', UNIT_SQUARE + [UNIT_SQUARE[0]])
    assert polygon.is_closed
    assert len(polygon.points) == 4


@pytest.mark.parametrize('points', [[(0, 0), (1, 1)], [(0, 0), (0, 0), (0, 0)], [(0, 0), (1, 0), (0, 0)]])
def test_degenerate_polygons(points):
    with pytest.raises(DegenerateGeometry):
        FootprintPolygon.from_points('bad', points)


def test_normalize_circle():
    angles = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    circle = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    seq = normalize_boundary(circle + 5.0)
    assert seq.r_max == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(seq.centroid, (5.0, 5.0), atol=1e-12)
    np.testing.assert_allclose(seq.points, circle / (1.0 + 1e-8), atol=1e-12)


def test_normalize_scales_by_largest_radius():
    seq = normalize_boundary(np.array([(-2, 0), (2, 0), (0, 1), (0, -1)], dtype=float))
    assert seq.r_max == 2.0
    np.testing.assert_allclose(seq.points[0], (-2 / (2 + 1e-8), 0.0))
    assert np.max(np.linalg.norm(seq.points, axis=1)) < 1.0


def test_normalize_identical_points():
    with pytest.raises(DegenerateGeometry):
        normalize_boundary(np.ones((8, 2)))


def test_orientation_of_axis_aligned_rectangle():
    # 120 points on a perimeter of 6 land on every vertex: the samples are mirror-symmetric.
    points = normalize_boundary(resample_boundary(FootprintPolygon.from_points('r', rectangle()), 120)).points
    assert principal_orientation(points) == pytest.approx(0.0, abs=1e-9)


def test_orientation_of_rotated_rectangle():
    polygon = FootprintPolygon.from_points('r', rotate(rectangle(), 0.3))
    points = normalize_boundary(resample_boundary(polygon, 120)).points
    assert principal_orientation(points) == pytest.approx(0.3, abs=1e-6)


def test_orientation_tie_break_for_square():
    points = normalize_boundary(resample_boundary(FootprintPolygon.from_points('sq', UNIT_SQUARE), 128)).points
    assert principal_orientation(points) == 0.0


def test_orientation_range():
    for angle in np.linspace(0, 2 * np.pi, 37):
        polygon = FootprintPolygon.from_points('r', rotate(rectangle(3, 1), angle))
        theta = principal_orientation(normalize_boundary(resample_boundary(polygon, 64)).points)
        assert 0.0 <= theta < math.pi


def _axis_distance(a, b):
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def test_orientation_rotation_equivariance(rng):
    for _ in range(100):
        n = int(rng.integers(5, 9))
        angles = np.sort(rng.uniform(0, 2 * np.pi, n))
        radii = rng.uniform(0.5, 2.0, n) * np.array([3.0, 1.0])[np.arange(n) % 2]
        base = [(r * math.cos(a) * 2.0, r * math.sin(a)) for r, a in zip(radii, angles)]
        phi = float(rng.uniform(0, 2 * np.pi))
        theta0 = principal_orientation(
            normalize_boundary(resample_boundary(FootprintPolygon.from_points('p', base), 128)).points)
        theta1 = principal_orientation(
            normalize_boundary(resample_boundary(FootprintPolygon.from_points('p', rotate(base, phi)), 128)).points)
        assert _axis_distance(theta1, theta0 + phi) <= 1e-6


@pytest.mark.parametrize('points, area', [
    (UNIT_SQUARE, 1.0),
    ([(0, 0), (4, 0), (0, 3)], 6.0),
    (UNIT_SQUARE[::-1], 1.0),
])
def test_footprint_area(points, area):
    assert footprint_area(FootprintPolygon.from_points('a', points)) == pytest.approx(area)


def test_hole_is_subtracted():
    polygon = FootprintPolygon.from_points('h', [(0, 0), (4, 0), (4, 4), (0, 4)],
                                           holes=[[(1, 1), (2, 1), (2, 2), (1, 2)]])
    assert footprint_area(polygon) == pytest.approx(15.0)


def test_spatial_features_of_unit_square():
    spatial, boundary = build_spatial_features(FootprintPolygon.from_points('sq', UNIT_SQUARE), height=10)
    assert (spatial.footprint_area, spatial.height, spatial.orientation) == (pytest.approx(1.0), 10.0, 0.0)
    assert boundary.length == 128


def test_translation_invariance():
    _, at_origin = build_spatial_features(FootprintPolygon.from_points('r', rectangle()))
    moved = [(x + 529000.0, y + 181000.0) for x, y in rectangle()]
    _, shifted = build_spatial_features(FootprintPolygon.from_points('r', moved))
    np.testing.assert_allclose(shifted.points, at_origin.points, atol=1e-9)


def test_scale_invariance():
    footprint = rectangle(20.0, 10.0)
    spatial, base = build_spatial_features(FootprintPolygon.from_points('r', footprint))
    big_spatial, big = build_spatial_features(FootprintPolygon.from_points('r', [(3 * x, 3 * y) for x, y in footprint]))
    np.testing.assert_allclose(big.points, base.points, atol=1e-9)
    assert big.r_max == pytest.approx(3 * base.r_max)
    assert big_spatial.footprint_area == pytest.approx(9 * spatial.footprint_area)


def test_negative_height_rejected():
    with pytest.raises(DegenerateGeometry):
        build_spatial_features(FootprintPolygon.from_points('sq', UNIT_SQUARE), height=-1.0)
