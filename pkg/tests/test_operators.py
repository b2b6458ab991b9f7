import numpy as np
import pytest

from gjms.einstein import factorized_apply, q_closed_form, sphere_eigenvalue
from gjms.errors import InadmissibleError, ParameterRangeError
from gjms.geometry import MetricChart
from gjms.jets import evaluate
from gjms.operators import (
    Flavor,
    admissible,
    apply_p2,
    apply_p4,
    covariance_residual,
    decomposition_residual,
    extrinsic_coefficients,
    intrinsic_coefficients,
    q_covariance_residual,
    tilde_coefficients,
    tilde_covariance_residual,
    umbilic_residual,
)
from gjms.registry import BUILTIN_GEOMETRIES, random_perturbed_geometry
from gjms.submanifold import Embedding, extrinsic_pack

OMEGA3 = "0.15*x1 - 0.1*x2*x3 + 0.05*x3^2"
OMEGA5 = "0.1*x1*x2 - 0.08*x3 + 0.05*x4*x5 + 0.04*x5^3"
OMEGA6 = "0.1*x1*x2 - 0.08*x3 + 0.05*x4*x6 + 0.04*x5^2"


def stereographic(n):
    squares = "+".join(f"x{i + 1}^2" for i in range(n))
    return MetricChart.conformally_flat(n, f"4/(1+{squares})^2")


def value(text, x):
    return float(evaluate(text, x, 0).value)


class TestAdmissibility:
    """Test the existence table of the extrinsic operators."""

    @pytest.mark.parametrize(
        "k,n,level,expected",
        [
            (2, 3, 1, True),
            (2, 3, 2, True),
            (2, 4, 2, False),
            (2, 5, 2, True),
            (2, 3, 3, False),
            (3, 5, 4, True),
            (3, 4, 2, False),
            (3, 6, 2, True),
            (4, 6, 3, False),
            (4, 7, 3, True),
            (1, 3, 2, True),
        ],
    )
    def test_table(self, k, n, level, expected):
        """Test parity and order conditions."""
        assert admissible(k, n, level) is expected

    @pytest.mark.parametrize("k,n,level", [(1, 2, 1), (3, 3, 1), (2, 5, 0)])
    def test_out_of_range(self, k, n, level):
        """Test parameters outside the supported range."""
        with pytest.raises(ParameterRangeError):
            admissible(k, n, level)


class TestQCurvature:
    """Test Q2 and Q4 on model submanifolds."""

    def test_q2_on_equator(self, equator_s2):
        """Test Q2 = 1 on the totally geodesic 2-sphere."""
        epack = extrinsic_pack(equator_s2.metric, equator_s2.embedding, [0.2, -0.1], 3)
        assert float(extrinsic_coefficients(epack, 1).q2.value) == pytest.approx(1.0, abs=1e-10)

    def test_q2_on_clifford_torus(self, clifford_torus):
        """Test Q2 = 1 on the minimal flat torus."""
        epack = extrinsic_pack(clifford_torus.metric, clifford_torus.embedding, [0.4, 0.1], 3)
        assert float(extrinsic_coefficients(epack, 1).q2.value) == pytest.approx(1.0, abs=1e-10)

    def test_q4_on_equatorial_four_sphere(self, equator_s4):
        """Test Q4 = 3! on the critical equator."""
        epack = extrinsic_pack(equator_s4.metric, equator_s4.embedding, [0.1, -0.2, 0.05, 0.15], 4)
        q4 = float(extrinsic_coefficients(epack).q4.value)
        assert q4 == pytest.approx(q_closed_form(4, 2), abs=1e-9)
        assert q4 == pytest.approx(6.0, abs=1e-9)

    def test_intrinsic_paneitz_q_of_round_three_sphere(self):
        """Test Qbar4 = 15/8 for the unit 3-sphere."""
        coeffs = intrinsic_coefficients(stereographic(3), [0.1, 0.2, -0.1], 4)
        assert coeffs.flavor is Flavor.INTRINSIC
        assert float(coeffs.q4.value) == pytest.approx(15 / 8, abs=1e-9)

    def test_fourth_order_undefined_in_dimension_four(self):
        """Test the 1/(n-4) obstruction."""
        flat = MetricChart.conformally_flat(4, "1")
        epack = extrinsic_pack(flat, Embedding.from_graph(2, ["0.1*x1^2", "0.2*x2^2"]), [0.0, 0.0], 4)
        with pytest.raises(InadmissibleError):
            extrinsic_coefficients(epack, 2)

    def test_intrinsic_needs_point(self):
        """Test that metric charts need a point and order."""
        with pytest.raises(ParameterRangeError):
            intrinsic_coefficients(stereographic(3))

    def test_intrinsic_paneitz_needs_k_three(self):
        """Test that surfaces have no intrinsic Paneitz operator."""
        with pytest.raises(InadmissibleError):
            intrinsic_coefficients(stereographic(2), [0.0, 0.0], 4)

    @pytest.mark.parametrize("name", sorted(BUILTIN_GEOMETRIES))
    def test_constant_term_on_builtin_geometries(self, name):
        """Test P_2l 1 = (k/2 - l) Q_2l at every admissible level."""
        spec = BUILTIN_GEOMETRIES[name]()
        levels = [level for level in (1, 2) if admissible(spec.k, spec.n, level)]
        assert levels
        for x in spec.sample_points(2, seed=9):
            epack = extrinsic_pack(spec.metric, spec.embedding, x, 4)
            for level in levels:
                coeffs = extrinsic_coefficients(epack, level)
                q = float((coeffs.q2 if level == 1 else coeffs.q4).value)
                assert coeffs.apply(level, "1") == pytest.approx((spec.k / 2 - level) * q, rel=1e-9, abs=1e-9)


class TestSpectrum:
    """Test operators on spherical harmonics of totally geodesic spheres."""

    @pytest.mark.parametrize("level", [1, 2])
    def test_equatorial_two_sphere(self, equator_s2, level):
        """Test P2 and P4 on harmonics of degree one to three."""
        x = [0.25, -0.15]
        epack = extrinsic_pack(equator_s2.metric, equator_s2.embedding, x, 5)
        coeffs = extrinsic_coefficients(epack, level)
        harmonics = {
            1: "2*x1/(1+x1^2+x2^2)",
            2: "2*x1*(1-x1^2-x2^2)/(1+x1^2+x2^2)^2",
            3: "8*x1*x2*(1-x1^2-x2^2)/(1+x1^2+x2^2)^3",
        }
        for m, f in harmonics.items():
            expected = sphere_eigenvalue(2, m, level) * value(f, x)
            assert coeffs.apply(level, f) == pytest.approx(expected, abs=1e-9)
        if level == 2:
            assert [sphere_eigenvalue(2, m, 2) for m in range(4)] == pytest.approx([0, 0, 24, 120])

    @pytest.mark.parametrize("m", [0, 1, 2, 3, 4])
    def test_great_circle(self, great_circle, m):
        """Test P4 = (m^2 - 1/4)(m^2 - 9/4) on cos(m theta)."""
        x = [0.3]
        epack = extrinsic_pack(great_circle.metric, great_circle.embedding, x, 5)
        f = f"cos({2 * m}*atan(x1))"
        expected = (m * m - 0.25) * (m * m - 2.25) * value(f, x)
        assert apply_p4(extrinsic_coefficients(epack), f, x) == pytest.approx(expected, rel=1e-9, abs=1e-9)
        assert sphere_eigenvalue(1, m, 2) == pytest.approx((m * m - 0.25) * (m * m - 2.25))

    def test_matches_factorization(self, equator_s4):
        """Test the closed form against the product of shifted Laplacians."""
        x = [0.1, 0.05, -0.1, 0.2]
        epack = extrinsic_pack(equator_s4.metric, equator_s4.embedding, x, 5)
        f = "x1*x2 + sin(x3) - 0.3*x4^3"
        closed = extrinsic_coefficients(epack).apply(2, f)
        assert closed == pytest.approx(factorized_apply(epack.chart, 1.0, 2, f), rel=1e-9, abs=1e-9)

    def test_great_circle_self_adjoint(self, great_circle):
        """Test <P4 f, g> = <f, P4 g> by trapezoidal quadrature in the arc length theta = 2 atan(x1)."""
        f = "exp(2*x1/(1+x1^2))"
        g = "(1+x1^2)/(3+x1^2)"
        count = 40
        lhs = rhs = 0.0
        for theta in -np.pi + 2 * np.pi * (np.arange(count) + 0.5) / count:
            x = [float(np.tan(theta / 2))]
            coeffs = extrinsic_coefficients(extrinsic_pack(great_circle.metric, great_circle.embedding, x, 4))
            lhs += coeffs.apply(2, f) * value(g, x)
            rhs += value(f, x) * coeffs.apply(2, g)
        assert lhs == pytest.approx(rhs, rel=1e-8)


class TestPrincipalPart:
    """Test that P_2l agrees with Delta^l up to lower order terms."""

    X = [0.1, 0.05, 0.12]
    XI = [1.0, 0.5, 0.3]

    def wave(self, t):
        phase = " + ".join(f"{c}*(x{i + 1} - {p})" for i, (c, p) in enumerate(zip(self.XI, self.X)))
        return f"cos({t}*({phase}))"

    @pytest.mark.parametrize("level", [1, 2])
    def test_leading_symbol(self, perturbed, level):
        """Test that the t^{2l} coefficient of P_2l cos(t xi.(x - x0)) at x0 is |xi|^{2l}."""
        epack = extrinsic_pack(perturbed.metric, perturbed.embedding, self.X, 4)
        coeffs = extrinsic_coefficients(epack, level)
        # odd powers of t drop out at phase zero
        ts = np.arange(1.0, level + 2)
        powers = np.vander(ts**2, level + 1)
        fitted = np.linalg.solve(powers, [coeffs.apply(level, self.wave(t)) for t in ts])
        xi = np.array(self.XI)
        symbol = float(xi @ epack.chart.inverse.value @ xi)
        assert fitted[0] == pytest.approx(symbol**level, rel=1e-8)
        q = float((coeffs.q2 if level == 1 else coeffs.q4).value)
        assert fitted[-1] == pytest.approx((perturbed.k / 2 - level) * q, rel=1e-8, abs=1e-10)


class TestApplication:
    """Test evaluation entry points."""

    def test_point_mismatch(self, sphere3):
        """Test coefficients reused at another point."""
        epack = extrinsic_pack(sphere3.metric, sphere3.embedding, [0.1, 0.1], 3)
        with pytest.raises(ParameterRangeError):
            apply_p2(extrinsic_coefficients(epack, 1), "x1", [0.2, 0.1])

    def test_inadmissible_application(self):
        """Test P4 for a surface in a four-manifold."""
        flat = MetricChart.conformally_flat(4, "1")
        epack = extrinsic_pack(flat, Embedding.from_graph(2, ["0", "0"]), [0.0, 0.0], 4)
        with pytest.raises(InadmissibleError):
            apply_p4(extrinsic_coefficients(epack, 1), "x1")

    def test_missing_fourth_order_data(self, sphere3):
        """Test P4 from second-order coefficients."""
        epack = extrinsic_pack(sphere3.metric, sphere3.embedding, [0.0, 0.0], 3)
        with pytest.raises(ParameterRangeError):
            extrinsic_coefficients(epack, 1).apply(2, "x1")

    def test_tilde_has_no_second_order(self, perturbed):
        """Test that the tilde flavor only defines the fourth-order part."""
        epack = extrinsic_pack(perturbed.metric, perturbed.embedding, [0.0, 0.0, 0.0], 5)
        with pytest.raises(ParameterRangeError):
            tilde_coefficients(epack).apply(1, "x1")


class TestConformalCovariance:
    """Test the transformation laws on generic geometries."""

    @pytest.mark.parametrize("level", [1, 2])
    def test_operator_covariance(self, perturbed, level):
        """Test P(e^{2w} g) f = e^{-(k/2+l) w} P(e^{(k/2-l) w} f)."""
        residual = covariance_residual(
            perturbed.metric, perturbed.embedding, level, OMEGA5, "sin(x1) + x2*x3^2", [0.1, -0.05, 0.12], 4
        )
        assert residual.relative < 1e-8

    def test_surface_covariance(self, perturbed_surface):
        """Test covariance of P4 for a surface in a 3-manifold."""
        residual = covariance_residual(
            perturbed_surface.metric, perturbed_surface.embedding, 2, OMEGA3, "x1^2 - x2", [0.1, 0.2], 4
        )
        assert residual.relative < 1e-8

    def test_critical_q2(self, perturbed_surface):
        """Test e^{2w} Qhat2 = Q2 + P2 w for k = 2."""
        residual = q_covariance_residual(perturbed_surface.metric, perturbed_surface.embedding, OMEGA3, [-0.1, 0.15], 4)
        assert residual.relative < 1e-8

    @pytest.mark.parametrize("level", [1, 2])
    def test_non_critical_q(self, perturbed, level):
        """Test the shifted Q law away from the critical dimension."""
        residual = q_covariance_residual(
            perturbed.metric, perturbed.embedding, OMEGA5, [0.05, 0.1, -0.1], 4, critical=False, level=level
        )
        assert residual.relative < 1e-8

    def test_critical_law_requires_even_k(self, perturbed):
        """Test the critical law for odd k."""
        with pytest.raises(InadmissibleError):
            q_covariance_residual(perturbed.metric, perturbed.embedding, OMEGA5, [0.0, 0.0, 0.0], 4)

    def test_tilde_covariance(self, perturbed):
        """Test that P4 - Pbar4 is itself covariant."""
        residuals = tilde_covariance_residual(
            perturbed.metric, perturbed.embedding, OMEGA5, "x1*x2 + cos(x3)", [0.1, 0.0, -0.05], 5
        )
        assert set(residuals) == {"operator"}
        assert residuals["operator"].relative < 1e-8


class TestFourDimensionalSubmanifold:
    """Test the critical dimension k = 4 inside a generic six-manifold."""

    @pytest.fixture(scope="class")
    def geometry(self):
        return random_perturbed_geometry(seed=3, k=4, n=6)

    X = [0.1, -0.05, 0.12, 0.08]

    def test_p4_covariance(self, geometry):
        """Test covariance of P4 with conformal weight zero on functions."""
        residual = covariance_residual(
            geometry.metric, geometry.embedding, 2, OMEGA6, "x1*x4 + sin(x2) - 0.2*x3^2", self.X, 4
        )
        assert residual.relative < 1e-8

    def test_critical_q4(self, geometry):
        """Test e^{4w} Qhat4 = Q4 + P4 w."""
        residual = q_covariance_residual(geometry.metric, geometry.embedding, OMEGA6, self.X, 4)
        assert residual.relative < 1e-8

    def test_p2_covariance(self, geometry):
        """Test covariance of P2 for k = 4."""
        residual = covariance_residual(geometry.metric, geometry.embedding, 1, OMEGA6, "x2*x3 - x4", self.X, 4)
        assert residual.relative < 1e-8


class TestDecomposition:
    """Test P4 = Pbar4 + Ptilde4."""

    @pytest.mark.parametrize("x", [[0.1, -0.1, 0.05], [-0.15, 0.2, 0.1]])
    def test_generic(self, perturbed, x):
        """Test the split of T, Q4 and Q2."""
        epack = extrinsic_pack(perturbed.metric, perturbed.embedding, x, 5)
        residuals = decomposition_residual(epack)
        assert max(residuals.t, residuals.q4, residuals.q2) < 1e-8

    def test_tilde_needs_k_three(self, perturbed_surface):
        """Test the tilde part for surfaces."""
        epack = extrinsic_pack(perturbed_surface.metric, perturbed_surface.embedding, [0.0, 0.0], 5)
        with pytest.raises(InadmissibleError):
            tilde_coefficients(epack)


class TestUmbilic:
    """Test P4 = Pbar4 for umbilic submanifolds of conformally flat spaces."""

    def test_small_sphere(self, small_sphere):
        """Test a latitude 3-sphere in the unit 5-sphere."""
        epack = extrinsic_pack(small_sphere.metric, small_sphere.embedding, [0.05, -0.1, 0.08], 5)
        residual = umbilic_residual(epack, "x1^2 + sin(x2)*x3")
        assert residual.relative < 1e-8

    def test_generic_geometry_differs(self, sphere5):
        """Test that a non-umbilic graph has P4 != Pbar4."""
        epack = extrinsic_pack(sphere5.metric, sphere5.embedding, [0.1, 0.1, -0.1], 5)
        assert umbilic_residual(epack, "x1^2 + x2*x3").value > 1e-6
