import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr, ndtri

import waistPy as wp
from waistPy.helpers import generator


STANDARD = [0.5]


def _half_line(offset=0.0):
    return wp.ConvexBody(1, 40.0, normals=[[1.0]], offsets=[offset])


def _slab(width=1.0, radius=12.0):
    return wp.ConvexBody(2, radius, normals=[[0.0, 1.0], [0.0, -1.0]], offsets=[width, width])


def test_half_line_center_is_lower_quartile():
    transport = wp.solveMonotoneTransport(STANDARD, _half_line())
    assert transport.method == "product"
    assert wp.transportCenter(transport)[0] == pytest.approx(-0.67449, abs=1e-3)
    assert transport.mass == pytest.approx(0.5)


def test_half_line_map_matches_cdf_inversion():
    x = np.linspace(-3, 3, 13)
    transport = wp.solveMonotoneTransport(wp.MeasureSpec.gaussianAniso(STANDARD), _half_line())
    assert transport(x[:, None])[:, 0] == pytest.approx(ndtri(ndtr(x) / 2), abs=1e-12)


def test_half_line_map_is_a_monotone_contraction():
    transport = wp.solveMonotoneTransport(STANDARD, _half_line())
    assert wp.lipschitzAudit(transport, 10 ** 5, seed=0) <= 1 + 1e-9
    assert wp.monotonicityAudit(transport, 10 ** 5, seed=0) >= -1e-9


def test_half_line_monge_ampere_residual():
    transport = wp.solveMonotoneTransport(STANDARD, _half_line())
    residual = wp.maResidual(transport, points=np.linspace(-2, 2, 41)[:, None])
    assert residual["count"] > 30
    assert residual["max"] <= 1e-6


def test_product_slab_keeps_origin():
    transport = wp.solveMonotoneTransport([0.5, 0.5], _slab())
    assert transport.method == "product"
    assert wp.transportCenter(transport) == pytest.approx([0.0, 0.0], abs=1e-12)
    image = transport([[1.3, 2.0]])[0]
    assert image[0] == pytest.approx(1.3)
    assert abs(image[1]) < 1.0


def test_shift_translates_the_target():
    transport = wp.solveMonotoneTransport(STANDARD, _half_line(), shift=[2.0])
    assert wp.transportCenter(transport)[0] == pytest.approx(2 + ndtri(0.25), abs=1e-9)
    assert transport.targetContains([[1.5]], tol=0.0)[0]
    assert not transport.targetContains([[2.5]], tol=0.0)[0]


def test_product_potential_is_convex():
    transport = wp.solveMonotoneTransport([0.5, 1.0], _slab(0.7))
    assert transport.potential.midpointGap(count=5000) <= 1e-9


def test_grid_solver_on_half_line():
    transport = wp.solveMonotoneTransport(STANDARD, _half_line(), resolution=64, method="grid")
    assert transport.method == "grid"
    assert transport.diagnostics["tv"] <= 0.02
    assert wp.transportCenter(transport)[0] == pytest.approx(ndtri(0.25), abs=0.05)


def test_grid_solver_shift_translates_the_map():
    x = np.linspace(-2, 2, 9)[:, None]
    plain = wp.solveMonotoneTransport(STANDARD, _half_line(), resolution=64, method="grid")
    shifted = wp.solveMonotoneTransport(STANDARD, _half_line(), resolution=64, method="grid", shift=[1.5])
    assert shifted(x)[:, 0] == pytest.approx(plain(x)[:, 0] + 1.5, abs=1e-12)
    assert wp.transportCenter(shifted)[0] == pytest.approx(wp.transportCenter(plain)[0] + 1.5, abs=1e-9)
    assert shifted.targetContains([[1.4]], tol=0.0)[0]
    assert not shifted.targetContains([[1.6]], tol=0.0)[0]


def test_product_solver_measures_its_discrepancy():
    for body in [_half_line(), _half_line(1.0), _slab(0.7)]:
        transport = wp.solveMonotoneTransport([0.5] * body.dim, body)
        assert transport.method == "product"
        assert 0.0 <= transport.diagnostics["tv"] <= 0.005


def test_solver_rejects_bad_inputs():
    with pytest.raises(wp.WaistError, match="Gaussian"):
        wp.solveMonotoneTransport(wp.MeasureSpec.uniformBall(1), _half_line())
    with pytest.raises(wp.WaistError, match="method"):
        wp.solveMonotoneTransport(STANDARD, _half_line(), method="newton")
    with pytest.raises(wp.WaistError, match="axis aligned"):
        body = wp.ConvexBody(2, 5.0, normals=[np.array([1.0, 1.0]) / np.sqrt(2)], offsets=[0.0])
        wp.solveMonotoneTransport([0.5, 0.5], body, method="product")
    with pytest.raises(wp.DegenerateError):
        flat = wp.ConvexBody(1, 5.0, normals=[[1.0], [-1.0]], offsets=[0.0, 0.0])
        wp.solveMonotoneTransport(STANDARD, flat)


def test_caffarelli_eligibility():
    assert wp.caffarelliEligible([1.0, 1.0], _slab(), target_scales=[2.0, 1.0])
    assert not wp.caffarelliEligible([1.0, 1.0], _slab(), target_scales=[0.5, 1.0])
    assert wp.caffarelliEligible(STANDARD, _half_line())


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_logdet_expansion_matches_closed_form(seed):
    rng = generator(seed)
    m = rng.standard_normal((3, 3))
    d0 = np.eye(3) + m @ m.T / 3
    d1 = rng.standard_normal((3, 3)) / 2
    d2 = rng.standard_normal((3, 3)) / 2
    fd, formula = wp.logdetExpansionCheck(d0, d1 + d1.T, d2 + d2.T)
    assert fd == pytest.approx(formula, abs=1e-6)


def test_logdet_expansion_rejects_indefinite_base():
    with pytest.raises(wp.WaistError, match="positive definite"):
        wp.logdetExpansionCheck(-np.eye(2), np.eye(2), np.eye(2))


def test_gradient_gap_estimate():
    grid = np.linspace(-3, 3, 601)
    eps = 0.2
    check = wp.gradientGapCheck(lambda x: 0.4 * x ** 2, lambda x: 0.4 * x ** 2 + 0.1 * eps ** 2 * np.cos(x), eps, grid)
    assert check["hypotheses"]
    assert check["holds"]
    assert check["max_gap"] <= 0.1 * eps ** 2 + 1e-4

    far = wp.gradientGapCheck(lambda x: 0.4 * x ** 2, lambda x: 0.4 * x ** 2 + eps ** 2, eps, grid)
    assert not far["hypotheses"]


def test_center_stability_on_half_line():
    eps = 0.1
    expected = abs(ndtri(ndtr(eps) / 2) - ndtri(0.25))
    assert wp.centerStability(_half_line(), eps, STANDARD) == pytest.approx(expected, abs=1e-9)

    schedule = wp.centerStabilitySchedule(_half_line(), [0.1, 0.05, 0.025], STANDARD)
    assert schedule["decreasing"].all()


def test_exported_potential_layout(tmp_path):
    transport = wp.solveMonotoneTransport([0.5, 0.5], _slab())
    path = tmp_path / "potential.bin"
    wp.exportPotential(transport, str(path), resolution=33)
    header = np.fromfile(str(path), dtype="<i4", count=3)
    assert header.tolist() == [2, 33, 33]
    axes, values = wp.readPotential(str(path))
    assert values.shape == (33, 33)
    assert axes[0][0] == pytest.approx(-8.0)


@pytest.mark.slow
def test_grid_slab_acceptance():
    transport = wp.solveMonotoneTransport([0.5, 0.5], _slab(0.5), resolution=128, method="grid")
    assert wp.lipschitzAudit(transport, 10 ** 5, seed=0) <= 1.02
    assert wp.monotonicityAudit(transport, 10 ** 5, seed=0) >= -1e-9
    assert wp.maResidual(transport)["mean"] <= 0.05
    assert wp.transportCenter(transport) == pytest.approx([0.0, 0.0], abs=0.02)
