import math

import numpy as np
import pytest

from cursive import geometry as geo


def rand_points(rng, n):
    pts = rng.normal(scale=5.0, size=(n, 3))
    pts[:, 2] = rng.integers(0, 2, size=n)
    return pts


def test_coords_to_offsets_single_point_anchors_at_origin():
    out = geo.coords_to_offsets([(0.0, 0.0, 1.0)])
    np.testing.assert_array_equal(out, [[0.0, 0.0, 1.0]])


def test_coords_to_offsets_consecutive_subtraction():
    out = geo.coords_to_offsets([(0, 0, 1), (3, 4, 1)])
    np.testing.assert_array_equal(out, [[0, 0, 1], [3, 4, 1]])


def test_coords_to_offsets_zero_move_with_pen_lift():
    out = geo.coords_to_offsets([(1, 1, 1), (1, 1, 0)])
    np.testing.assert_array_equal(out, [[1, 1, 1], [0, 0, 0]])


def test_coords_to_offsets_rejects_empty():
    with pytest.raises(geo.EmptySequenceError):
        geo.coords_to_offsets(np.empty((0, 3)))


def test_offsets_to_coords_cumsum_and_empty():
    out = geo.offsets_to_coords([(0, 0, 1), (3, 4, 1)])
    np.testing.assert_array_equal(out, [[0, 0, 1], [3, 4, 1]])
    assert geo.offsets_to_coords(np.empty((0, 3))).shape == (0, 3)


def test_coords_offsets_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        pts = rand_points(rng, int(rng.integers(1, 40)))
        back = geo.offsets_to_coords(geo.coords_to_offsets(pts))
        np.testing.assert_allclose(back, pts, atol=1e-9)


def test_cartesian_to_polar_axes():
    out = geo.cartesian_to_polar([(1, 0, 1)])
    np.testing.assert_allclose(out, [[0.0, 1.0, 1.0]])
    out = geo.cartesian_to_polar([(0, 2, 0)])
    np.testing.assert_allclose(out, [[math.pi / 2, 2.0, 0.0]])


def test_cartesian_to_polar_345_triangle():
    # independent scalar oracle: math.atan2 / math.hypot
    out = geo.cartesian_to_polar([(3, 4, 1)])
    assert out[0, 0] == pytest.approx(math.atan2(4, 3), abs=1e-12)
    assert out[0, 0] == pytest.approx(0.927295, abs=1e-6)
    assert out[0, 1] == pytest.approx(5.0, abs=1e-12)
    assert out[0, 2] == 1.0


def test_zero_offset_gets_canonical_theta():
    out = geo.cartesian_to_polar([(0.0, 0.0, 1.0)])
    np.testing.assert_array_equal(out, [[0.0, 0.0, 1.0]])


def test_polar_to_cartesian_basics():
    np.testing.assert_allclose(geo.polar_to_cartesian([(0, 1, 1)]), [[1, 0, 1]], atol=1e-12)
    np.testing.assert_allclose(
        geo.polar_to_cartesian([(math.pi, 0, 0)]), [[0, 0, 0]], atol=1e-12
    )


def test_polar_round_trip_and_range():
    rng = np.random.default_rng(11)
    offs = rand_points(rng, 10_000)
    polar = geo.cartesian_to_polar(offs)
    assert np.all(polar[:, 0] >= -np.pi) and np.all(polar[:, 0] < np.pi)
    assert np.all(polar[:, 1] >= 0)
    back = geo.polar_to_cartesian(polar)
    np.testing.assert_allclose(back, offs, atol=1e-9)
    np.testing.assert_array_equal(back[:, 2], offs[:, 2])


def test_negative_x_axis_maps_to_minus_pi():
    out = geo.cartesian_to_polar([(-1.0, 0.0, 1.0)])
    assert out[0, 0] == -np.pi


def test_apply_affine_identity_and_arithmetic():
    pts = np.array([[2.0, 3.0, 1.0]])
    np.testing.assert_array_equal(geo.apply_affine(pts, 0.0, 1.0, 1.0), pts)
    out = geo.apply_affine(pts, 0.5, 1.0, 1.0)
    np.testing.assert_allclose(out, [[3.5, 3.0, 1.0]])
    out = geo.apply_affine(pts, 0.0, 1.1, 0.9)
    np.testing.assert_allclose(out, [[2.2, 2.7, 1.0]])


def test_apply_affine_rejects_bad_scales():
    with pytest.raises(ValueError):
        geo.apply_affine([(0, 0, 1)], 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        geo.apply_affine([(0, 0, 1)], 0.0, 1.0, -2.0)


def test_affine_composition_matches_single_affine():
    rng = np.random.default_rng(3)
    pts = rand_points(rng, 50)
    # x -> s2x*(s1x*(x + h1*y) + h2*s1y*y), composed params below
    h1, s1x, s1y = 0.3, 1.1, 0.9
    h2, s2x, s2y = -0.2, 0.95, 1.05
    two_step = geo.apply_affine(geo.apply_affine(pts, h1, s1x, s1y), h2, s2x, s2y)
    composed = geo.apply_affine(pts, h1 + h2 * s1y / s1x, s2x * s1x, s2y * s1y)
    np.testing.assert_allclose(two_step, composed, atol=1e-9)


def test_pen_flags_preserved_everywhere():
    rng = np.random.default_rng(5)
    pts = rand_points(rng, 200)
    for out in (
        geo.coords_to_offsets(pts),
        geo.offsets_to_coords(pts),
        geo.cartesian_to_polar(pts),
        geo.apply_affine(pts, 0.2, 1.05, 0.97),
    ):
        np.testing.assert_array_equal(out[:, 2], pts[:, 2])


def test_pen_run_slices():
    #         travel  draw draw | travel draw
    pts = [(0, 0, 1), (1, 0, 1), (2, 0, 1), (3, 0, 0), (4, 0, 1)]
    assert geo.pen_run_slices(pts) == [(0, 3), (3, 5)]
    assert geo.pen_run_slices([(0, 0, 0)]) == []
