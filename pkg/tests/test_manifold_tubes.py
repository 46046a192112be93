import numpy as np
import pytest

import waistPy as wp
from waistPy.helpers import generator, normalize_rows
from waistPy.manifold_tubes import polynomialFromDict
from waistPy.tube_volumes import sphericalTubeFraction


def _random_cp(count, variables, seed):
    v = normalize_rows(generator(seed).standard_normal((count, 2 * variables)))
    return v[:, :variables] + 1j * v[:, variables:]


def test_polynomial_evaluation_and_gradient():
    conic = wp.Polynomial({(1, 0, 1): 1.0, (0, 2, 0): -1.0})
    z = np.array([[1.0, 2.0, 3.0], [1j, 0.0, 1j]])
    assert conic.degree == 2
    assert conic.evaluate(z).tolist() == pytest.approx([3 - 4, -1.0])
    assert conic.gradient(z)[0].tolist() == pytest.approx([3.0, -4.0, 1.0])
    assert polynomialFromDict(conic.to_dict()).evaluate(z).tolist() == pytest.approx(conic.evaluate(z).tolist())


def test_polynomial_must_be_homogeneous():
    with pytest.raises(wp.WaistError, match="homogeneous"):
        wp.Polynomial({(1, 0): 1.0, (0, 2): 1.0})
    with pytest.raises(wp.WaistError, match="'data'"):
        polynomialFromDict({"monomials": []})
    with pytest.raises(wp.WaistError, match="'terms'"):
        wp.Polynomial({})


def test_manifold_validation():
    with pytest.raises(wp.WaistError, match="unit sphere"):
        wp.EmbeddedManifold("bad", "sphere", 2, 1, chart=lambda p: np.column_stack([p, p, p]), domain=[(0.5, 1.0)])
    with pytest.raises(wp.WaistError, match="polynomials"):
        wp.EmbeddedManifold("bad", "cp", 2, 1, distance=lambda z: np.zeros(z.shape[0]))
    with pytest.raises(wp.WaistError, match="'manifold'"):
        wp.getManifold("torus")


def test_great_circle_is_orthogonal_to_third_axis():
    manifold = wp.getManifold("great-circle-s3")
    distance, ok = wp.geodesicDistanceTo(manifold, [0.0, 0.0, 1.0, 0.0])
    assert ok.all()
    assert distance[0] == pytest.approx(np.pi / 2)


def test_pole_of_cp_line():
    manifold = wp.getManifold("cp-line")
    distance, _ = wp.geodesicDistanceTo(manifold, [0.0, 1.0, 0.0])
    assert distance[0] == pytest.approx(np.pi / 2)
    assert manifold.degree == 1


def test_chart_distance_matches_closed_form():
    manifold = wp.getManifold("great-circle-s3")
    x = normalize_rows(generator(1).standard_normal((200, 4)))
    chart, ok = wp.geodesicDistanceTo(manifold, x, method="chart")
    exact, _ = wp.geodesicDistanceTo(manifold, x, method="analytic")
    assert ok.all()
    assert chart == pytest.approx(exact, abs=1e-6)


def test_latitude_chart_distance():
    manifold = wp.getManifold("latitude")
    x = normalize_rows(generator(2).standard_normal((200, 3)))
    chart, _ = wp.geodesicDistanceTo(manifold, x, method="chart")
    assert chart == pytest.approx(manifold.distance(x), abs=1e-6)


def test_unfinished_chart_solves_are_flagged():
    manifold = wp.getManifold("latitude")
    x = normalize_rows(generator(3).standard_normal((200, 3)))
    _, ok = wp.geodesicDistanceTo(manifold, x, method="chart", iterations=1)
    assert not ok.all()
    _, ok = wp.geodesicDistanceTo(manifold, x, method="chart")
    assert ok.all()

    table = wp.tubeFractionMC(manifold, [0.5], count=2000, seed=3, method="chart", iterations=1)
    assert table["failures"].iloc[0] > 1e-3
    assert table["verdict"].iloc[0] == "inconclusive"


def test_algebraic_distance_matches_hyperplane_formula():
    manifold = wp.getManifold("cp-line")
    z = _random_cp(200, 3, seed=3)
    algebraic, ok = wp.geodesicDistanceTo(manifold, z, method="algebraic")
    exact, _ = wp.geodesicDistanceTo(manifold, z, method="analytic")
    assert ok.all()
    assert algebraic == pytest.approx(exact, abs=1e-6)


def test_distance_method_errors():
    with pytest.raises(wp.WaistError, match="closed form"):
        wp.geodesicDistanceTo(wp.getManifold("cp-conic"), [1.0, 0.0, 0.0], method="analytic")
    with pytest.raises(wp.WaistError, match="chart"):
        wp.geodesicDistanceTo(wp.getManifold("cp-line"), [1.0, 0.0, 0.0], method="chart")
    with pytest.raises(wp.WaistError, match="unit sphere"):
        wp.geodesicDistanceTo(wp.getManifold("equator"), [2.0, 0.0, 0.0])


def test_hopf_lift_contains_the_fiber_circle():
    lift = wp.hopfLift(wp.getManifold("cp-point"))
    assert lift.ambient == "sphere"
    assert lift.n == 3
    assert lift.dim == 1
    theta = np.linspace(0, 2 * np.pi, 9)

    # layout [Re z0, Re z1, Im z0, Im z1]
    points = np.column_stack([np.cos(theta), np.zeros(9), np.sin(theta), np.zeros(9)])
    distance, ok = wp.geodesicDistanceTo(lift, points)
    assert ok.all()
    assert np.all(distance <= 1e-6)

    far, _ = wp.geodesicDistanceTo(lift, [0.0, 1.0, 0.0, 0.0])
    assert far[0] == pytest.approx(np.pi / 2, abs=1e-6)


def test_hopf_lift_needs_cp_manifold():
    with pytest.raises(wp.WaistError, match="CP\\^n"):
        wp.hopfLift(wp.getManifold("equator"))


def test_cp_line_tube_matches_closed_form():
    t = np.array([0.2, 0.4, 0.6])
    table = wp.tubeFractionMC(wp.getManifold("cp-line"), t, count=10 ** 5, seed=4)
    assert list(table.columns) == ["t", "estimate", "stderr", "lower", "upper", "failures", "verdict"]
    assert table["lower"].values == pytest.approx(1 - np.cos(t) ** 4, abs=1e-10)
    assert np.all(np.abs(table["estimate"] - table["lower"]) <= 4 * table["stderr"])
    assert (table["verdict"] == "ok").all()


def test_great_circle_tube_in_s3():
    table = wp.tubeFractionMC(wp.getManifold("great-circle-s3"), [0.3, 0.9], count=10 ** 5, seed=5, chunk=2 ** 14)
    assert np.all(np.abs(table["estimate"] - sphericalTubeFraction(3, 1, table["t"].values)) <= 4 * table["stderr"])
    assert table["upper"].isna().all()


def test_latitude_circle_misses_the_lower_bound():
    table = wp.tubeFractionMC(wp.getManifold("latitude"), [0.5], count=10 ** 5, seed=6)
    assert table["estimate"].iloc[0] == pytest.approx(np.cos(np.pi / 6) * np.sin(0.5), abs=0.01)
    assert table["verdict"].iloc[0] == "below-lower"


def test_whole_projective_line_covers_everything():
    table = wp.tubeFractionMC(wp.getManifold("cp1"), [0.1], count=1000)
    assert table["estimate"].iloc[0] == 1.0
    assert table["lower"].iloc[0] == 1.0


def test_tube_rejects_large_radius():
    with pytest.raises(wp.WaistError, match="'t'"):
        wp.tubeFractionMC(wp.getManifold("equator"), [2.0], count=10)


def test_conic_lies_between_degree_bounds():
    table = wp.degreeBoundCheck(wp.getManifold("cp-conic"), [0.2, 0.4, 0.6], count=10 ** 4, seed=7)
    assert table["within"].all()
    assert table["upper"].values == pytest.approx(np.minimum(1, 2 * (1 - np.cos([0.2, 0.4, 0.6]) ** 4)))
    assert table.attrs["smoothness"] > 1e-6


def test_degree_check_needs_algebraic_cp_manifold():
    with pytest.raises(wp.WaistError, match="CP\\^n"):
        wp.degreeBoundCheck(wp.getManifold("equator"), [0.2], count=10)


@pytest.mark.parametrize("name,degree", [("cp-line", 1), ("cp-conic", 2), ("fermat-quartic", 4)])
def test_crofton_count_recovers_degree(name, degree):
    result = wp.croftonDegree(wp.getManifold(name), lines=500, seed=8)
    assert result["degree"] == degree
    assert result["mean_intersections"] == pytest.approx(degree, rel=0.05)
    assert result["volume"] == pytest.approx(result["mean_intersections"] * np.pi)


def test_crofton_needs_a_hypersurface():
    with pytest.raises(wp.WaistError, match="hypersurface"):
        wp.croftonDegree(wp.getManifold("latitude"))


def test_circle_invariance_of_conic():
    probe = wp.circleInvarianceProbe(wp.getManifold("cp-conic"), count=50, seed=9)
    assert probe["checked"] > 0
    assert probe["passes"]


def test_smoothness_of_fermat_quartic():
    assert wp.smoothnessProbe(wp.getManifold("fermat-quartic")) > 1e-6
    assert wp.smoothnessProbe(wp.getManifold("cp1")) == np.inf


def test_hopf_consistency_of_cp_line():
    result = wp.hopfConsistency(wp.getManifold("cp-line"), 0.5, count=20000, seed=10)
    assert result["consistent"]
    assert result["cp"] == pytest.approx(1 - np.cos(0.5) ** 4, abs=4 * result["cp_stderr"])


def test_equator_voronoi_cells_are_centered():
    table = wp.voronoiDisintegrationProbe(wp.getManifold("equator"), site_count=8, count=10 ** 5, seed=11)
    assert table.shape[0] == 8
    assert np.all(np.abs(table["mass"] - 1 / 8) <= 4 * table["stderr"])
    assert table["centered"].all()
    assert table["mass"].sum() == pytest.approx(1.0)


def test_latitude_voronoi_cells_are_off_center():
    table = wp.voronoiDisintegrationProbe(wp.getManifold("latitude"), site_count=8, count=10 ** 5, seed=12)
    assert not table["centered"].any()


def test_voronoi_cells_widen_when_sparse():
    table = wp.voronoiDisintegrationProbe(wp.getManifold("equator"), site_count=8, count=4000, seed=13,
                                          min_samples=900)
    assert table.shape[0] == 4
    assert (table["samples"] >= 900).all()


def test_voronoi_needs_signed_distance():
    with pytest.raises(wp.WaistError, match="signed distance"):
        wp.voronoiDisintegrationProbe(wp.getManifold("great-circle-s3"), count=100)


def test_manifold_samples_lie_on_manifold():
    conic = wp.getManifold("cp-conic")
    points = conic.sample(20, seed=1)
    assert np.abs(conic.polynomials[0].evaluate(points)).max() <= 1e-8
    torus = wp.getManifold("clifford-torus")
    assert torus.distance(torus.sample(20)) == pytest.approx(np.zeros(20), abs=1e-12)
    assert conic.to_dict()["degree"] == 2
