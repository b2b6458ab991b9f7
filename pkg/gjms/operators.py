"""
Extrinsic GJMS operators P2, P4 and Q-curvatures Q2, Q4 of a submanifold.

P2 = -Laplacian + (k-2)/2 Q2
P4 = Laplacian^2 + div(T grad) + (k-4)/2 Q4

Coefficients come in three flavors: the extrinsic closed forms, the intrinsic
Yamabe/Paneitz data of the induced metric, and the tilde part carrying the
difference of the two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from gjms.errors import InadmissibleError, ParameterRangeError
from gjms.geometry import CurvaturePack, MetricChart, conformal_metric
from gjms.jets import ExprNode, Jet, contract
from gjms.submanifold import (
    Embedding,
    ExtrinsicPack,
    FialkowPack,
    InducedChart,
    extrinsic_pack,
    fialkow_pack,
    mean_curvature_gradient,
)

logger = logging.getLogger(__name__)

FunctionLike = Union[str, ExprNode, Jet]


class Flavor(str, Enum):
    EXTRINSIC = "extrinsic"
    INTRINSIC = "intrinsic"
    TILDE = "tilde"


class Residual(NamedTuple):
    """Absolute residual of an identity plus the magnitude it is measured against."""

    value: float
    scale: float = 0.0

    @property
    def relative(self) -> float:
        return self.value / (1.0 + self.scale)


def admissible(k: int, n: int, level: int) -> bool:
    """Whether the extrinsic operator of order 2*level exists for Sigma^k in M^n."""
    if n < 3 or not 1 <= k <= n - 1 or level < 1:
        raise ParameterRangeError(f"parameters out of range: k={k}, n={n}, level={level}")
    if k % 2 == 1:
        return n % 2 == 1 or 2 * level < n
    if 2 * level > k + 2:
        return False
    if 2 * level == k + 2 and n % 2 == 0:
        return n > k + 2
    return True


def require_admissible(k: int, n: int, level: int) -> None:
    if not admissible(k, n, level):
        raise InadmissibleError(f"no operator of order {2 * level} for k={k}, n={n}")


@dataclass
class OperatorCoefficients:
    k: int
    n: Optional[int]
    flavor: Flavor
    chart: InducedChart
    q2: Jet
    t: Optional[Jet] = None
    q4: Optional[Jet] = None

    def apply(self, level: int, f: FunctionLike) -> float:
        return float(self.apply_jet(level, f).value)

    def apply_jet(self, level: int, f: FunctionLike) -> Jet:
        """The operator applied to f, as a jet at the chart point."""
        u = self.chart.expand(f)
        if level == 1:
            if self.flavor is Flavor.TILDE:
                raise ParameterRangeError("the tilde flavor carries no second-order operator")
            return -self.chart.laplacian(u) + u * self.q2 * ((self.k - 2) / 2)
        if level == 2:
            if self.t is None or self.q4 is None:
                raise ParameterRangeError("fourth-order coefficients were not computed")
            flux = contract("AB,BC,C->A", self.t, self.chart.inverse, u.grad())
            result = self.chart.divergence(flux) + u * self.q4 * ((self.k - 4) / 2)
            if self.flavor is not Flavor.TILDE:
                result = result + self.chart.laplacian(self.chart.laplacian(u))
            return result
        raise ParameterRangeError(f"operators of level {level} have no closed form")


def _check_point(coeffs: OperatorCoefficients, x: Optional[Sequence[float]]) -> None:
    if x is not None and not np.allclose(np.asarray(x, dtype=float), coeffs.chart.point):
        raise ParameterRangeError("coefficients were expanded at a different chart point")


def apply_p2(coeffs: OperatorCoefficients, f: FunctionLike, x: Optional[Sequence[float]] = None) -> float:
    _check_point(coeffs, x)
    if coeffs.n is not None and coeffs.flavor is Flavor.EXTRINSIC:
        require_admissible(coeffs.k, coeffs.n, 1)
    return coeffs.apply(1, f)


def apply_p4(coeffs: OperatorCoefficients, f: FunctionLike, x: Optional[Sequence[float]] = None) -> float:
    _check_point(coeffs, x)
    if coeffs.n is not None and coeffs.flavor is Flavor.EXTRINSIC:
        require_admissible(coeffs.k, coeffs.n, 2)
    return coeffs.apply(2, f)


def _weyl_cotton_bach_terms(epack: ExtrinsicPack) -> Jet:
    """-2 W^a_AaB H^A H^B - 4 C^a_aA H^A - 2/(n-4) B^a_a."""
    hinv, H = epack.inverse, epack.mean_curvature
    weyl_hh = contract("AB,APBQ,P,Q->", hinv, epack.ambient_tensor("weyl", "tntn"), H, H)
    cotton_h = contract("AB,ABP,P->", hinv, epack.ambient_tensor("cotton", "ttn"), H)
    bach_trace = epack.chart.trace(epack.ambient_tensor("bach", "tt"))
    return weyl_hh * -2.0 - cotton_h * 4.0 - bach_trace * (2.0 / (epack.n - 4))


def extrinsic_coefficients(epack: ExtrinsicPack, level: int = 2) -> OperatorCoefficients:
    """Closed-form Q2 (and for level 2: T, Q4) of the extrinsic operators."""
    k, n = epack.k, epack.n
    if level >= 2 and n == 4:
        raise InadmissibleError("fourth-order coefficients are undefined for n = 4")
    h, chart = epack.metric, epack.chart
    H, L = epack.mean_curvature, epack.second_fundamental_form
    schouten_tt = epack.ambient_tensor("schouten", "tt")
    H2 = contract("P,P->", H, H)
    trace_p = chart.trace(schouten_tt)
    q2 = trace_p + H2 * (k / 2)
    coeffs = OperatorCoefficients(k=k, n=n, flavor=Flavor.EXTRINSIC, chart=chart, q2=q2)
    if level < 2:
        return coeffs
    HL = contract("ABP,P->AB", L, H)
    coeffs.t = schouten_tt * 4.0 + HL * 4.0 - h * (trace_p * (k - 2) + H2 * ((k * k - 2 * k + 4) / 2))
    gauss = schouten_tt + HL - h * H2 * 0.5
    codazzi = epack.ambient_tensor("schouten", "tn") - mean_curvature_gradient(epack)
    coeffs.q4 = (
        -chart.laplacian(q2)
        - epack.norm2(gauss, "tt") * 2.0
        + epack.norm2(codazzi, "tn") * 2.0
        + q2 * q2 * (k / 2)
        + _weyl_cotton_bach_terms(epack)
    )
    return coeffs


def intrinsic_coefficients(
    chart: Union[InducedChart, MetricChart],
    point: Optional[Sequence[float]] = None,
    order: Optional[int] = None,
    level: int = 2,
) -> OperatorCoefficients:
    """Yamabe (J) and Paneitz (T, Q4) data of a metric on Sigma."""
    if isinstance(chart, MetricChart):
        if point is None or order is None:
            raise ParameterRangeError("a point and jet order are needed to expand a metric chart")
        chart = InducedChart.from_metric(chart, point, order)
    k = chart.k
    if k < 2 or (level >= 2 and k < 3):
        raise InadmissibleError(f"intrinsic operator of level {level} needs larger k, got k={k}")
    curvature = chart.curvature()
    J = curvature.J
    coeffs = OperatorCoefficients(k=k, n=None, flavor=Flavor.INTRINSIC, chart=chart, q2=J)
    if level < 2:
        return coeffs
    schouten = curvature.require("schouten")
    coeffs.t = schouten * 4.0 - chart.metric * J * (k - 2)
    coeffs.q4 = -chart.laplacian(J) - chart.norm2(schouten) * 2.0 + J * J * (k / 2)
    return coeffs


def tilde_coefficients(
    epack: ExtrinsicPack,
    fpack: Optional[FialkowPack] = None,
    intrinsic: Optional[CurvaturePack] = None,
) -> OperatorCoefficients:
    """The Fialkow part: T = 4F - (k-2) G h and the matching Q4 part."""
    k = epack.k
    if k < 3:
        raise InadmissibleError(f"the tilde decomposition needs k >= 3, got k={k}")
    if epack.n == 4:
        raise InadmissibleError("fourth-order coefficients are undefined for n = 4")
    fpack = fpack or fialkow_pack(epack)
    intrinsic = intrinsic or epack.chart.curvature()
    chart, h = epack.chart, epack.metric
    F, G, D = fpack.F, fpack.G, fpack.D
    schouten_bar, J_bar = intrinsic.require("schouten"), intrinsic.J
    q4 = (
        -chart.laplacian(G)
        - chart.norm2(F) * 2.0
        + G * G * (k / 2)
        - contract("AC,BD,AB,CD->", chart.inverse, chart.inverse, F, schouten_bar) * 4.0
        + G * J_bar * k
        + epack.norm2(D, "tn") * 2.0
        + _weyl_cotton_bach_terms(epack)
    )
    return OperatorCoefficients(
        k=k,
        n=epack.n,
        flavor=Flavor.TILDE,
        chart=chart,
        q2=G,
        t=F * 4.0 - h * G * (k - 2),
        q4=q4,
    )


@dataclass
class DecompositionResiduals:
    t: float
    q4: float
    q2: float


def _max_abs(jet: Jet) -> float:
    return float(np.abs(jet.value).max()) if jet.ndim else abs(float(jet.value))


def decomposition_residual(epack: ExtrinsicPack) -> DecompositionResiduals:
    """Differences T - Tbar - Ttilde, Q4 - Qbar4 - Qtilde4 and Q2 - Jbar - G at the point."""
    full = extrinsic_coefficients(epack)
    bar = intrinsic_coefficients(epack.chart)
    tilde = tilde_coefficients(epack)
    return DecompositionResiduals(
        t=_max_abs(full.t - bar.t - tilde.t),
        q4=_max_abs(full.q4 - bar.q4 - tilde.q4),
        q2=_max_abs(full.q2 - bar.q2 - tilde.q2),
    )


def _residual(lhs: Jet, rhs: Jet, scale: Jet) -> Residual:
    return Residual(abs(float(lhs.value) - float(rhs.value)), abs(float(scale.value)))


def covariance_residual(
    metric: MetricChart,
    embedding: Embedding,
    level: int,
    omega: Union[str, ExprNode],
    f: Union[str, ExprNode],
    x: Sequence[float],
    order: int,
) -> Residual:
    """P^(e^{2w} g) f - e^{(-k/2-l) w} P^g(e^{(k/2-l) w} f), with both sides computed from scratch."""
    k, n = embedding.k, embedding.n
    require_admissible(k, n, level)
    epack = extrinsic_pack(metric, embedding, x, order)
    hpack = extrinsic_pack(conformal_metric(metric, omega), embedding, x, order)
    coeffs = extrinsic_coefficients(epack, level)
    hcoeffs = extrinsic_coefficients(hpack, level)
    u = epack.chart.expand(f)
    w = epack.restrict_expression(omega)
    lhs = hcoeffs.apply_jet(level, u)
    inner = coeffs.apply_jet(level, (w * (k / 2 - level)).exp() * u)
    rhs = (w * (-k / 2 - level)).exp() * inner
    return _residual(lhs, rhs, inner)


def _q_coefficient(coeffs: OperatorCoefficients, level: int) -> Jet:
    return coeffs.q2 if level == 1 else coeffs.q4


def q_covariance_residual(
    metric: MetricChart,
    embedding: Embedding,
    omega: Union[str, ExprNode],
    x: Sequence[float],
    order: int,
    *,
    critical: bool = True,
    level: Optional[int] = None,
) -> Residual:
    """Transformation law of Q: e^{k w} Qhat = Q + P w when k = 2l, the shifted law otherwise."""
    k, n = embedding.k, embedding.n
    if critical:
        if k not in (2, 4):
            raise InadmissibleError(f"critical Q-curvature laws are implemented for k in (2, 4), got k={k}")
        level = k // 2
    elif level not in (1, 2) or k == 2 * level:
        raise InadmissibleError(f"non-critical law needs level in (1, 2) with k != 2 level, got k={k}, level={level}")
    require_admissible(k, n, level)
    epack = extrinsic_pack(metric, embedding, x, order)
    hpack = extrinsic_pack(conformal_metric(metric, omega), embedding, x, order)
    coeffs = extrinsic_coefficients(epack, level)
    hcoeffs = extrinsic_coefficients(hpack, level)
    w = epack.restrict_expression(omega)
    q, q_hat = _q_coefficient(coeffs, level), _q_coefficient(hcoeffs, level)
    if critical:
        lhs = (w * k).exp() * q_hat
        rhs = q + coeffs.apply_jet(level, w)
        return _residual(lhs, rhs, q)
    shift = k / 2 - level
    weight = (w * shift).exp()
    # P reduced by its constant term: (P - shift Q) applied to e^{shift w}
    reduced = coeffs.apply_jet(level, weight) - weight * q * shift
    lhs = (w * (2 * level)).exp() * q_hat
    rhs = q + (w * -shift).exp() * reduced * (1.0 / shift)
    return _residual(lhs, rhs, q)


def tilde_covariance_residual(
    metric: MetricChart,
    embedding: Embedding,
    omega: Union[str, ExprNode],
    f: Union[str, ExprNode],
    x: Sequence[float],
    order: int,
) -> dict[str, Residual]:
    """Covariance of P4 - Pbar4, and for k = 4 the critical law of its Q part."""
    k = embedding.k
    epack = extrinsic_pack(metric, embedding, x, order)
    hpack = extrinsic_pack(conformal_metric(metric, omega), embedding, x, order)
    coeffs = tilde_coefficients(epack)
    hcoeffs = tilde_coefficients(hpack)
    u = epack.chart.expand(f)
    w = epack.restrict_expression(omega)
    inner = coeffs.apply_jet(2, (w * (k / 2 - 2)).exp() * u)
    results = {
        "operator": _residual(hcoeffs.apply_jet(2, u), (w * (-k / 2 - 2)).exp() * inner, inner),
    }
    if k == 4:
        lhs = (w * 4.0).exp() * hcoeffs.q4
        results["critical_q"] = _residual(lhs, coeffs.q4 + coeffs.apply_jet(2, w), coeffs.q4)
    return results


def umbilic_residual(epack: ExtrinsicPack, f: Union[str, ExprNode, Jet]) -> Residual:
    """P4 f - Pbar4 f; vanishes for umbilic Sigma in a conformally flat ambient."""
    u = epack.chart.expand(f)
    extrinsic = extrinsic_coefficients(epack).apply_jet(2, u)
    intrinsic = intrinsic_coefficients(epack.chart).apply_jet(2, u)
    return _residual(extrinsic, intrinsic, extrinsic)
