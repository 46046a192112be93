import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import waistPy as wp
from waistPy.maps import (
    TestMap, homogeneityProbe, oddnessProbe, orthogonalityProbe, poleReachProbe, projectToFiber, ORTHOGONAL_ANGLE
)
from waistPy.helpers import generator, normalize_rows


@pytest.mark.parametrize("name", ["linear", "x1", "odd-cubic", "wavy"])
def test_odd_maps_are_odd(name):
    assert oddnessProbe(wp.getMap(name, 3)) <= 1e-12


def test_homogeneous_maps():
    assert homogeneityProbe(wp.getMap("z1z2", 4)) <= 1e-12
    assert homogeneityProbe(wp.getMap("radial", 3)) <= 1e-12
    with pytest.raises(wp.WaistError, match="degree"):
        homogeneityProbe(wp.getMap("wavy", 3))


def test_unknown_map_and_bad_codimension():
    with pytest.raises(wp.WaistError, match="'map'"):
        wp.getMap("cubic", 3)
    with pytest.raises(wp.WaistError, match="'k'"):
        wp.getMap("linear", 3, 4)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10 ** 6), y=st.floats(min_value=-1.5, max_value=1.5))
def test_numeric_projection_matches_linear_fiber(seed, y):
    f = TestMap("x1-numeric", 3, 1, lambda x: x[:, :1])
    x = generator(seed).standard_normal((20, 3))
    distance, ok = wp.fiberDistance(f, x, [y])
    assert ok.all()
    assert distance == pytest.approx(np.abs(x[:, 0] - y), abs=1e-8)


def test_numeric_geodesic_matches_arcsine():
    x = normalize_rows(generator(3).standard_normal((50, 3)))
    f = TestMap("x1-numeric", 3, 1, lambda x: x[:, :1])
    distance, ok = wp.fiberDistance(f, x, [0.0], metric="geodesic")
    assert ok.all()
    assert distance == pytest.approx(np.abs(np.arcsin(x[:, 0])), abs=1e-6)
    exact, _ = wp.fiberDistance(wp.getMap("x1", 3), x, [0.0], metric="geodesic")
    assert exact == pytest.approx(distance, abs=1e-6)


def test_odd_cubic_distance_is_bounded_by_vertical_gap():
    f = wp.getMap("odd-cubic", 3)
    x = 0.5 * generator(4).standard_normal((200, 3))
    distance, nearest, ok = projectToFiber(f, x, [0.3])
    assert ok.all()
    assert np.all(distance <= np.abs(f(x)[:, 0] - 0.3) + 1e-9)
    assert f(nearest)[:, 0] == pytest.approx(np.full(200, 0.3), abs=1e-8)


def test_fiber_projection_lands_on_fiber():
    f = wp.getMap("wavy", 2)
    x = generator(5).standard_normal((30, 2))
    nearest, ok = wp.fiberProjection(f, x, [0.0])
    assert ok.all()
    assert np.abs(f(nearest)[:, 0]).max() <= 1e-8


def test_sphere_orthogonal_level_set():
    f = wp.getMap("sphere-orthogonal", 3)
    assert orthogonalityProbe(f) <= 1e-5

    cone = 2 * np.array([[np.cos(ORTHOGONAL_ANGLE), np.sin(ORTHOGONAL_ANGLE), 0.0]])
    assert f(cone)[0, 0] == pytest.approx(1.0)
    assert f.fiber_distance(cone, np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-12)

    # the arc passes through the origin
    assert f.fiber_distance(np.zeros((1, 3)), np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-12)
    assert f.fiber_distance(cone, np.array([0.5])) is None


def test_radius_wedge_distance_and_projection():
    f = wp.getMap("radius-wedge", 4, 2)
    x = np.array([[0.0, 1.0, 0.0, 0.0], [0.3, 0.0, 1.0, 0.0]])
    distance, ok = wp.fiberDistance(f, x, [0.0, 0.0])
    assert ok.all()
    assert distance[0] == pytest.approx(0.0)
    assert distance[1] == pytest.approx(np.hypot(0.3, np.cos(0.05)))

    nearest, _ = wp.fiberProjection(f, x, [0.0, 0.0])
    assert np.abs(f(nearest)).max() <= 1e-9
    assert np.linalg.norm(x - nearest, axis=1) == pytest.approx(distance)


def test_complex_product_and_fermat_fibers():
    product = wp.getMap("z1z2", 4)
    x = np.array([[1.0, 0.0, 0.5, 0.0]])
    assert product.fiber_distance(x, np.zeros(2))[0] == pytest.approx(0.5)
    nearest, _ = wp.fiberProjection(product, x, np.zeros(2))
    assert np.abs(product(nearest)).max() == 0.0

    fermat = wp.getMap("fermat", 4)
    assert fermat.fiber_distance(np.array([[1.0, 0.0, 0.0, 0.0]]), np.zeros(2))[0] == pytest.approx(1 / np.sqrt(2))


def test_pole_reach_of_coordinate_map():
    assert poleReachProbe(wp.getMap("x1", 3), [0.0]) == pytest.approx(1.0)


def test_builtin_maps_with_codimension_two():
    maps = wp.builtinMaps(4, 2)
    assert "radius-wedge" in maps
    assert maps["linear-k"].k == 2
    assert "radius-wedge" not in wp.builtinMaps(3, 1)
