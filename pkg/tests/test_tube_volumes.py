import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import waistPy as wp
from waistPy.tube_volumes import _direct_tube, _imhof_tube, sphericalTubeIntegral


T_GRID = np.linspace(0.0, 1.5, 16)


def test_gaussian_plane_tube_closed_form():
    values = wp.gaussianSubspaceTube([1.0, 1.0], T_GRID)
    assert np.allclose(values, 1 - np.exp(-T_GRID ** 2), atol=1e-8)


def test_gaussian_line_tube_is_erf():
    # one normal coordinate with scale 1/2 is a standard normal
    assert wp.gaussianSubspaceTube([0.5], 1.0) == pytest.approx(0.6826894921370859, abs=1e-12)


def test_gaussian_tube_without_normal_coordinates_is_full():
    assert wp.gaussianSubspaceTube([], 0.3) == 1.0


def test_direct_quadrature_matches_radial_closed_form():
    for t in [0.1, 0.7, 2.0]:
        assert _direct_tube(np.array([2.0, 2.0]), t) == pytest.approx(1 - np.exp(-2 * t ** 2), abs=1e-8)
        assert _direct_tube(np.array([1.0, 1.0, 1.0]), t) == pytest.approx(
            float(wp.gaussianSubspaceTube([1.0, 1.0, 1.0], t)), abs=1e-7
        )


def test_imhof_inversion_matches_radial_closed_form():
    for t in [0.5, 1.0, 1.8]:
        assert _imhof_tube(np.ones(4), t) == pytest.approx(float(wp.gaussianSubspaceTube([1.0] * 4, t)), abs=1e-6)


def test_anisotropic_tube_lies_between_isotropic_tubes():
    t = np.array([0.3, 0.8, 1.4])
    mixed = wp.gaussianSubspaceTube([1.0, 2.0], t)
    assert np.all(mixed >= wp.gaussianSubspaceTube([1.0, 1.0], t) - 1e-10)
    assert np.all(mixed <= wp.gaussianSubspaceTube([2.0, 2.0], t) + 1e-10)


def test_anisotropic_tube_matches_closed_form():
    # scales (1, 1, 2, 2) give P(|y|^2 <= x) = (1 - e^{-x})^2
    t = np.linspace(0.05, 4.0, 64)
    values = wp.gaussianSubspaceTube([1.0, 1.0, 2.0, 2.0], t)
    assert np.max(np.abs(values - (1 - np.exp(-t ** 2)) ** 2)) <= 1e-8


def test_quadrature_tolerance_is_taken_from_config(monkeypatch):
    captured = {}

    def fake_table(*args):
        captured["tol"] = args[-1]
        return None

    monkeypatch.setattr("waistPy.waist.tubeTable", fake_table)
    wp.Waist(wp.Config(quad_tol=1e-6)).tubeTable("sphere", 2, 1, [0.5])
    assert captured["tol"] == 1e-6
    coarse = wp.gaussianSubspaceTube([1.0, 2.0], 0.8, tol=1e-6)
    assert coarse == pytest.approx(float(wp.gaussianSubspaceTube([1.0, 2.0], 0.8)), abs=1e-5)


def test_gaussian_tube_rejects_bad_scales():
    with pytest.raises(wp.WaistError, match="scales"):
        wp.gaussianSubspaceTube([1.0, 0.0], 0.5)
    with pytest.raises(wp.WaistError, match="'t'"):
        wp.gaussianSubspaceTube([1.0], -0.1)


def test_great_circle_tube_in_two_sphere_is_sine():
    t = np.linspace(0, np.pi / 2, 20)
    assert np.allclose(wp.sphericalTubeFraction(2, 1, t), np.sin(t), atol=1e-10)


def test_spherical_tube_saturates_beyond_right_angle():
    assert wp.sphericalTubeFraction(3, 1, 2.0) == 1.0
    assert wp.sphericalTubeFraction(3, 1, 0.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_spherical_closed_form_matches_quadrature(data):
    n = data.draw(st.integers(min_value=1, max_value=8))
    k = data.draw(st.integers(min_value=0, max_value=n - 1))
    t = data.draw(st.floats(min_value=0.0, max_value=np.pi / 2))
    assert wp.sphericalTubeFraction(n, k, t) == pytest.approx(sphericalTubeIntegral(n, k, t), abs=1e-9)


def test_cp_line_tube_in_cp2():
    t = np.linspace(0, np.pi / 2, 20)
    assert np.allclose(wp.cpTubeFraction(2, 1, t), 1 - np.cos(t) ** 4, atol=1e-10)


def test_cp_point_tube_in_cp1_is_sine_squared():
    t = np.array([0.2, 0.9, 1.3])
    assert np.allclose(wp.cpTubeFraction(1, 0, t), np.sin(t) ** 2, atol=1e-10)


def test_spherical_tube_rejects_bad_codimension():
    with pytest.raises(wp.WaistError, match="'k'"):
        wp.sphericalTubeFraction(2, 2, 0.5)
    with pytest.raises(wp.WaistError, match="'t'"):
        wp.sphericalTubeFraction(2, 1, 4.0)


def test_disk_strip_fraction():
    t = np.array([0.1, 0.5, 0.9])
    expected = 2 / np.pi * (t * np.sqrt(1 - t ** 2) + np.arcsin(t))
    values = wp.radialSubspaceTube(wp.MeasureSpec.uniformBall(2), 1, t)
    assert np.allclose(values, expected, atol=1e-8)


def test_sphere_slab_fraction_is_linear():
    # archimedes: the band |x_3| <= t of S^2 has area fraction t
    t = np.array([0.2, 0.6, 1.0])
    values = wp.radialSubspaceTube(wp.MeasureSpec.uniformSphere(3), 2, t)
    assert np.allclose(values, t, atol=1e-10)


def test_atom_mixture_adds_atom_mass():
    spec = wp.MeasureSpec.atomSphereMix(3, atom_mass=0.25)
    assert wp.radialSubspaceTube(spec, 2, 0.4) == pytest.approx(0.25 + 0.75 * 0.4, abs=1e-10)


def test_uniform_radial_profile_matches_ball():
    spec = wp.MeasureSpec.radialDensity(2, profile={"name": "uniform"}, support_radius=1.0)
    ball = wp.MeasureSpec.uniformBall(2)
    t = np.array([0.2, 0.5])
    assert np.allclose(wp.radialSubspaceTube(spec, 1, t), wp.radialSubspaceTube(ball, 1, t), atol=1e-7)


def test_radial_tube_rejects_anisotropic_gaussian():
    with pytest.raises(wp.WaistError, match="radial"):
        wp.radialSubspaceTube(wp.MeasureSpec.gaussianAniso([1.0, 2.0]), 1, 0.5)


def test_model_tube_uses_smallest_scales():
    spec = wp.MeasureSpec.gaussianAniso([3.0, 1.0, 2.0])
    t = np.array([0.4, 1.1])
    assert np.allclose(wp.modelTube(spec, 1, t), wp.gaussianSubspaceTube([1.0], t))


def test_geodesic_model_tube_requires_sphere():
    with pytest.raises(wp.WaistError, match="metric"):
        wp.modelTube(wp.MeasureSpec.uniformBall(3), 1, [0.5], metric="geodesic")


def test_tube_table_columns():
    table = wp.tubeTable("sphere", 2, 1, np.array([0.5, 1.0]))
    assert list(table.columns) == ["t", "fraction"]
    assert table["fraction"].tolist() == pytest.approx(np.sin([0.5, 1.0]).tolist(), abs=1e-10)


def test_restriction_domination_holds_for_every_subset():
    table = wp.restrictionDominationCheck([3.0, 2.0, 1.0], 2, np.linspace(0.1, 2.0, 8))
    assert table.shape[0] == 3 * 8
    assert table["holds"].all()


def test_pancake_bounds():
    assert wp.pancakenessBound(0.1, 1.0) == pytest.approx(0.01 / 4.4)
    assert wp.pancakeRatioBound([1.0], 1, 0.05, 0.1) == pytest.approx(-0.1)
    assert wp.pancakeRatioBound([1.0, 4.0], 1, 1.1, 0.1) == pytest.approx(float(wp.gaussianSubspaceTube([1.0], 1.0)) - 0.1)
