import numpy as np
import pytest
from scipy.stats import norm

import waistPy as wp


def _box(lower, upper, radius=10.0):
    return wp.ConvexBody.box(lower, upper, radius)


def test_support_function_of_ball_and_box():
    assert wp.supportFunction(wp.ConvexBody.ball(3, 2.0), [1.0, 0.0, 0.0]) == pytest.approx(2.0, abs=1e-6)
    box = _box([-1.0, -1.0], [1.0, 1.0])
    assert wp.supportFunction(box, np.array([1.0, 1.0]) / np.sqrt(2)) == pytest.approx(np.sqrt(2), abs=1e-6)


def test_width_of_slab():
    slab = wp.ConvexBody(2, 3.0, normals=[[1.0, 0.0], [-1.0, 0.0]], offsets=[0.5, 0.5])
    assert wp.directionalWidth(slab, [1.0, 0.0]) == pytest.approx(1.0, abs=1e-6)
    assert wp.directionalWidth(slab, [0.0, 1.0]) == pytest.approx(6.0, abs=1e-5)


def test_gauge_of_box():
    box = _box([-1.0, -1.0], [1.0, 1.0])
    assert wp.gauge(box, [0.5, 0.25])[0] == pytest.approx(0.5)
    assert wp.gauge(box, [[0.0, -2.0], [0.0, 0.0]]).tolist() == pytest.approx([2.0, 0.0])
    with pytest.raises(wp.WaistError, match="origin"):
        wp.gauge(_box([0.0, -1.0], [1.0, 1.0]), [0.5, 0.0])


def test_contains_and_with_halfspace():
    body = wp.ConvexBody.ball(2, 1.0).withHalfspace([0.0, 1.0], 0.2)
    assert body.contains([[0.0, 0.1], [0.0, 0.3], [0.9, 0.9]]).tolist() == [True, False, False]
    with pytest.raises(wp.WaistError, match="unit"):
        wp.ConvexBody.ball(2).withHalfspace([0.0, 2.0], 0.2)


def test_body_dict_normalizes_normals():
    body = wp.bodyFromDict({"dim": 2, "radius": 4.0, "halfspaces": [{"normal": [2.0, 0.0], "offset": 1.0}]})
    assert body.normals.tolist() == [[1.0, 0.0]]
    assert body.offsets.tolist() == [0.5]
    assert body.to_dict()["halfspaces"][0]["offset"] == 0.5
    with pytest.raises(wp.WaistError, match="required"):
        wp.bodyFromDict({"dim": 2})
    with pytest.raises(wp.WaistError, match="Unknown"):
        wp.bodyFromDict({"dim": 2, "radius": 1.0, "center": [0, 0]})


def test_gaussian_mass_of_half_plane():
    body = wp.ConvexBody(2, 20.0, normals=[[1.0, 0.0]], offsets=[0.0])
    assert wp.bodyMeasure(body, wp.MeasureSpec.gaussianAniso([1.0, 1.0])) == pytest.approx(0.5, abs=1e-6)


def test_uniform_mass_of_quarter_disk():
    body = _box([0.0, 0.0], [5.0, 5.0], radius=1.0)
    assert wp.bodyMeasure(body, wp.MeasureSpec.uniformBall(2)) == pytest.approx(0.25, abs=1e-6)


def test_monte_carlo_mass_in_three_dimensions():
    body = wp.ConvexBody(3, 1.0, normals=[[1.0, 0.0, 0.0]], offsets=[0.0])
    assert wp.bodyMeasure(body, wp.MeasureSpec.uniformBall(3), seed=1) == pytest.approx(0.5, abs=0.005)


def test_equal_measure_cut_matches_gaussian_quantile():
    body = wp.ConvexBody.ball(2, 20.0)
    spec = wp.MeasureSpec.gaussianAniso([1.0, 1.0])
    assert wp.equalMeasureCut(body, spec, [1.0, 0.0]) == pytest.approx(0.0, abs=1e-6)
    quartile = norm.ppf(0.25) / np.sqrt(2)
    assert wp.equalMeasureCut(body, spec, [0.0, 1.0], fraction=0.25) == pytest.approx(quartile, abs=1e-5)


def test_equal_measure_cut_of_half_disk():
    body = wp.ConvexBody(2, 1.0, normals=[[0.0, -1.0]], offsets=[0.0])
    c = wp.equalMeasureCut(body, wp.MeasureSpec.uniformBall(2), [1.0, 0.0])
    assert c == pytest.approx(0.0, abs=1e-6)


def test_equal_measure_cut_rejects_bad_fraction():
    with pytest.raises(wp.WaistError, match="fraction"):
        wp.equalMeasureCut(wp.ConvexBody.ball(2), wp.MeasureSpec.uniformBall(2), [1.0, 0.0], fraction=1.2)


def test_john_ellipsoid_of_box():
    ellipsoid = wp.johnEllipsoid(_box([-1.0, -2.0], [1.0, 2.0]))
    assert ellipsoid.semiaxes.tolist() == pytest.approx([2.0, 1.0], abs=1e-3)
    assert np.allclose(ellipsoid.center, 0, atol=1e-3)
    assert ellipsoid.sandwich_verified


def test_thin_box_is_a_pancake():
    box = _box([-1.0, -0.01], [1.0, 0.01])
    delta, flat = wp.pancakeDeficiency(box, 1)
    assert delta == pytest.approx(0.01, abs=1e-4)
    assert delta <= 2 * wp.johnEllipsoid(box).semiaxes[1] + 1e-6
    assert abs(flat.basis[0, 0]) == pytest.approx(1.0, abs=1e-3)
    assert flat.distance([[0.5, 0.3]])[0] == pytest.approx(0.3, abs=1e-3)


def test_pancake_deficiency_covers_the_body():
    body = wp.randomPolytope(3, 10, seed=2)
    delta, flat = wp.pancakeDeficiency(body, 2)
    points = wp.sampleBody(wp.MeasureSpec.uniformBall(3, body.radius), body, 2000, seed=3).points
    assert flat.distance(points).max() <= delta + 1e-6


def test_voronoi_cell():
    sites = [[1.0, 0.0], [-1.0, 0.0], [0.0, 3.0]]
    cell = wp.voronoiCell(sites[0], sites, wp.ConvexBody.ball(2, 5.0))
    assert cell.contains([[0.5, 0.0], [-0.5, 0.0], [0.5, 2.5]]).tolist() == [True, False, False]
    with pytest.raises(wp.WaistError, match="duplicates"):
        wp.voronoiCell(sites[0], sites + [sites[0]], wp.ConvexBody.ball(2, 5.0))


def test_random_polytope_has_interior():
    body = wp.randomPolytope(3, 12, seed=4)
    assert body.normals.shape == (12, 3)
    assert body.hasInterior()
    assert body.contains(np.zeros(3))[0]
