import numpy as np
import pytest

import waistPy as wp


def _certify(name, count=10 ** 5, seed=0):
    preset = wp.counterexamplePreset(name)
    return wp.counterexampleCertify(
        preset["spec"], preset["map"], preset["t_grid"], preset["y_candidates"], count=count, seed=seed,
        metric=preset["metric"]
    )


def test_delta_sphere_is_violated_in_closed_form():
    verdict = _certify("delta-sphere", count=2000)
    assert verdict.status == "violated"
    assert len(verdict.witnesses) == 2
    for witness in verdict.witnesses:
        assert witness["t"] == 0.5
        assert witness["margin"] == pytest.approx(1 / 6, abs=1e-9)
        assert witness["closed_form"]

    curve = verdict.curves["0"]
    assert list(curve.columns) == ["t", "lhs", "lhs_stderr", "rhs", "margin", "failures"]
    assert curve["lhs"].iloc[0] == pytest.approx(0.5)
    assert curve["rhs"].iloc[0] == pytest.approx(2 / 3, abs=1e-9)


def test_sphere_orthogonal_level_set_is_violated():
    verdict = _certify("sphere-orthogonal", count=2 * 10 ** 5)
    assert verdict.status == "violated"
    assert verdict.witnesses[0]["sigmas"] > 3


def test_ball_wedge_is_violated():
    assert _certify("ball-wedge").status == "violated"


def test_linear_control_is_satisfied():
    assert _certify("linear-control").status == "satisfied"


def test_unknown_preset():
    with pytest.raises(wp.WaistError, match="preset"):
        wp.counterexamplePreset("cube")


def test_equator_reproduces_sine():
    t = np.array([0.2, 0.5, 1.0])
    curve = wp.waistCurve(wp.MeasureSpec.uniformSphere(3), wp.getMap("x1", 3), [0.0], t, count=10 ** 5, seed=1,
                          metric="geodesic")
    assert curve["rhs"].values == pytest.approx(np.sin(t), abs=1e-10)
    assert np.all(np.abs(curve["lhs"] - np.sin(t)) <= 4 * curve["lhs_stderr"] + 1e-12)
    assert (curve["failures"] == 0).all()


def test_odd_cubic_on_sphere_meets_the_bound():
    curve = wp.waistCurve(wp.MeasureSpec.uniformSphere(3), wp.getMap("odd-cubic", 3), [0.0], [0.2, 0.5, 1.0],
                          count=20000, seed=2, metric="geodesic")
    assert np.all(curve["margin"] >= -3 * curve["lhs_stderr"])


def test_gaussian_linear_fiber_tube():
    spec = wp.MeasureSpec.gaussianAniso([0.5, 0.5])
    estimate, stderr = wp.fiberTubeMeasure(spec, wp.getMap("linear", 2), [0.0], 1.0, count=50000, seed=3)
    assert abs(estimate - 0.6826894921370859) <= 4 * stderr


def test_geodesic_metric_needs_unit_sphere():
    with pytest.raises(wp.WaistError, match="metric"):
        wp.waistCurve(wp.MeasureSpec.uniformBall(3), wp.getMap("x1", 3), [0.0], [0.5], count=10, metric="geodesic")
    with pytest.raises(wp.WaistError, match="'y'"):
        wp.waistCurve(wp.MeasureSpec.uniformBall(3), wp.getMap("x1", 3), [0.0, 1.0], [0.5], count=10)


def test_cube_slab_attains_equality():
    body = wp.ConvexBody.box([-1.0, -1.0], [1.0, 1.0], 1.5)
    t = np.array([0.25, 0.5, 0.75, 1.0])
    curve = wp.normNeighborhoodCheck(body, wp.getMap("linear", 2, 1), t, count=20000, seed=4)
    assert curve["rhs"].tolist() == pytest.approx(t.tolist())
    assert np.all(np.abs(curve["lhs"] - t) <= 3 * curve["lhs_stderr"] + 1e-12)


def test_norm_check_requires_value_for_even_maps():
    with pytest.raises(wp.WaistError, match="'y'"):
        wp.normNeighborhoodCheck(wp.ConvexBody.ball(3), wp.getMap("radial", 3), [0.5], count=10)
    with pytest.raises(wp.WaistError, match="t_grid"):
        wp.normNeighborhoodCheck(wp.ConvexBody.ball(3), wp.getMap("x1", 3), [1.5], count=10)


@pytest.mark.slow
def test_gaussian_demo_end_to_end():
    result = wp.theoremDemo([1.0, 2.0], wp.getMap("wavy", 2), 2, 6.0, [0.25, 0.5, 1.0, 2.0], seed=0)
    assert result.passes
    assert result.curve.shape[0] == 4
    assert result.tree.F_values.shape == (4, 1)
    assert result.delta == pytest.approx(wp.pancakenessBound(0.1, 6.0))
