import numpy as np
import pytest

from gjms.einstein import canonical_family_coefficients, q_closed_form
from gjms.errors import InadmissibleError
from gjms.geometry import MetricChart
from gjms.normalform import (
    U4Placeholder,
    apply_p4_expanded,
    closed_form_gap,
    general_operator_coefficients,
    minimal_boundary_coefficients,
    normalization_constant,
    pipeline_apply_p4,
    pipeline_coefficients,
    poincare_coefficients,
    q_trace_consistency,
    to_normal_form,
    trace_identity_residual,
    u4_perturbation,
)
from gjms.operators import extrinsic_coefficients
from gjms.registry import random_perturbed_geometry
from gjms.submanifold import Embedding, InducedChart, extrinsic_pack


@pytest.fixture
def generic_epack(perturbed):
    return extrinsic_pack(perturbed.metric, perturbed.embedding, [0.08, -0.12, 0.1], 5)


class TestNormalization:
    """Test the normalization constants of the critical Q-curvatures."""

    @pytest.mark.parametrize("level,expected", [(1, -1), (2, 4), (3, -64)])
    def test_constants(self, level, expected):
        """Test a_l^-1 = (-1)^l 2^(2l-2) ((l-1)!)^2."""
        assert normalization_constant(level) == expected

    def test_trace_coefficients(self):
        """Test that tr h2 enters Q2 with -1 and tr h4 enters Q4 with 8."""
        report = q_trace_consistency()
        assert report.q2_coefficient == pytest.approx(-1.0, abs=1e-9)
        assert report.q4_coefficient == pytest.approx(8.0, abs=1e-9)
        assert report.passed()


class TestPipeline:
    """Test the normal-form route against the closed-form coefficients."""

    @pytest.mark.parametrize("f", ["x1*x2 + x3^2", "sin(x1 - x3) * exp(0.5*x2)"])
    def test_generic_geometry(self, generic_epack, f):
        """Test pipeline P4 f against the closed form."""
        assert closed_form_gap(generic_epack, f).relative < 1e-8

    @pytest.mark.parametrize("seed", range(20))
    def test_random_geometries(self, seed):
        """Test pipeline P4 f against the closed form on seeded random geometries."""
        spec = random_perturbed_geometry(seed=seed)
        for x in spec.sample_points(2, seed):
            epack = extrinsic_pack(spec.metric, spec.embedding, x, 4)
            assert closed_form_gap(epack, "x1*x2 - 0.5*x3^3 + cos(x2)").relative < 1e-8

    def test_coefficients_agree(self, generic_epack):
        """Test T and Q4 from the normal form against the closed form."""
        pipeline = pipeline_coefficients(generic_epack).coefficients
        closed = extrinsic_coefficients(generic_epack)
        np.testing.assert_allclose(pipeline.t.value, closed.t.value, atol=1e-9)
        assert float(pipeline.q4.value) == pytest.approx(float(closed.q4.value), abs=1e-9)
        assert float(pipeline.q2.value) == pytest.approx(float(closed.q2.value), abs=1e-12)

    def test_apply_from_scratch(self, perturbed):
        """Test the stand-alone pipeline entry point."""
        x = [0.0, 0.1, -0.1]
        f = "x1 + x2*x3"
        direct = pipeline_apply_p4(perturbed.metric, perturbed.embedding, None, f, x, 5)
        epack = extrinsic_pack(perturbed.metric, perturbed.embedding, x, 5)
        assert direct == pytest.approx(extrinsic_coefficients(epack).apply(2, f), rel=1e-8, abs=1e-10)

    def test_surface(self, perturbed_surface):
        """Test k = 2 where the bulk enters through n - 4 = -1."""
        epack = extrinsic_pack(perturbed_surface.metric, perturbed_surface.embedding, [0.1, -0.05], 5)
        assert closed_form_gap(epack, "x1^2*x2 + cos(x2)").relative < 1e-8

    def test_trace_identity(self, generic_epack):
        """Test 8 tr h4 against the boundary invariants."""
        assert trace_identity_residual(generic_epack).relative < 1e-8

    def test_expanded_form(self, generic_epack):
        """Test the expanded operator against the divergence form."""
        nf = pipeline_coefficients(generic_epack).normal_form
        chart = generic_epack.chart
        f = "x1^3 - x2*x3"
        divergence_form = general_operator_coefficients(chart, nf.h2, nf.h4).apply(2, f)
        assert apply_p4_expanded(chart, nf.h2, nf.h4, f) == pytest.approx(divergence_form, rel=1e-9, abs=1e-10)

    def test_dimension_four(self):
        """Test that the boundary coefficients need n != 4."""
        flat = MetricChart.conformally_flat(4, "1")
        epack = extrinsic_pack(flat, Embedding.from_graph(2, ["0.1*x1*x2", "0"]), [0.0, 0.0], 4)
        with pytest.raises(InadmissibleError):
            minimal_boundary_coefficients(epack)


class TestFreeCoefficient:
    """Test independence of the free r^4 normal coefficient."""

    def test_scalars_do_not_move(self, generic_epack, rng):
        """Test trace h4, Q4 and P4 under a change of U4."""
        report = u4_perturbation(
            generic_epack,
            U4Placeholder.random(generic_epack.codim, rng),
            U4Placeholder.zero(generic_epack.codim),
            "x1*x3 + x2",
        )
        assert report.h4_difference < 1e-10
        assert report.passed(1e-8)

    def test_h4_moves_by_traceless_part(self, generic_epack):
        """Test that h4 itself does depend on U4."""
        zero = pipeline_coefficients(generic_epack).normal_form.h4
        moved = pipeline_coefficients(generic_epack, U4Placeholder((1.0, -1.0))).normal_form.h4
        assert np.abs((moved - zero).value).max() > 1e-6


class TestEinsteinFillings:
    """Test normal forms of Einstein fillings."""

    @pytest.mark.parametrize("k", [3, 4, 5, 6])
    def test_canonical_family_q(self, k):
        """Test Q2 = k/2 and Q4 = k(k^2-4)/8 from h2 = -h/2, h4 = h/16."""
        chart = InducedChart.flat(k, 4)
        h2, h4 = canonical_family_coefficients(1.0, chart.metric)
        coeffs = general_operator_coefficients(chart, h2, h4)
        assert float(coeffs.q2.value) == pytest.approx(q_closed_form(k, 1))
        assert float(coeffs.q4.value) == pytest.approx(q_closed_form(k, 2))

    def test_poincare_of_round_sphere(self):
        """Test that the round 3-sphere has the canonical normal form."""
        sphere = MetricChart.conformally_flat(3, "4/(1+x1^2+x2^2+x3^2)^2")
        chart = InducedChart.from_metric(sphere, [0.1, -0.2, 0.05], 5)
        h2, h4 = poincare_coefficients(chart)
        c2, c4 = canonical_family_coefficients(1.0)
        np.testing.assert_allclose(h2.value, c2 * chart.metric.value, atol=1e-10)
        np.testing.assert_allclose(h4.value, c4 * chart.metric.value, atol=1e-10)

    def test_poincare_undefined_for_k_four(self):
        """Test the 1/(k-4) pole."""
        with pytest.raises(InadmissibleError):
            poincare_coefficients(InducedChart.flat(4, 4))

    def test_equator_normal_form(self, equator_s4):
        """Test that a totally geodesic equator sees the canonical h2."""
        epack = extrinsic_pack(equator_s4.metric, equator_s4.embedding, [0.1, 0.0, -0.1, 0.05], 4)
        nf = to_normal_form(minimal_boundary_coefficients(epack), epack.chart)
        np.testing.assert_allclose(nf.h2.value, -0.5 * epack.metric.value, atol=1e-10)
        np.testing.assert_allclose(nf.h4.value, epack.metric.value / 16, atol=1e-10)
