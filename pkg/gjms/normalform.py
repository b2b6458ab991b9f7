"""
Asymptotic route to P4: boundary data of the compactified induced metric, its
passage to normal form, and the generic operator formulas in terms of the
normal-form coefficients h2, h4.

The free normal vector U4 (the r^4 coefficient of the minimal extension) enters
h4 only through -2 L0 . U4, which is trace free; every scalar output is
independent of it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from gjms.errors import InadmissibleError
from gjms.geometry import MetricChart
from gjms.jets import ExprNode, Jet, contract
from gjms.operators import (
    Flavor,
    OperatorCoefficients,
    Residual,
    extrinsic_coefficients,
    require_admissible,
)
from gjms.submanifold import Embedding, ExtrinsicPack, InducedChart, extrinsic_pack, mean_curvature_gradient

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class U4Placeholder:
    """Frame components of the free coefficient U4, constant over the chart."""

    components: tuple[float, ...]

    @classmethod
    def zero(cls, codim: int) -> "U4Placeholder":
        return cls(tuple(0.0 for _ in range(codim)))

    @classmethod
    def random(cls, codim: int, rng: np.random.Generator, scale: float = 1.0) -> "U4Placeholder":
        return cls(tuple(float(v) for v in rng.uniform(-scale, scale, codim)))

    def as_jet(self, dim: int, order: int) -> Jet:
        return Jet.constant(np.array(self.components, dtype=float), dim, order)


@dataclass
class BoundaryCoefficients:
    """r^2, r^4 data D, K of h_ab, r^3 datum A of h_a0, r^2, r^4 data E, F of h_00."""

    D: Jet
    K: Jet
    A: Jet
    E: Jet
    F: Jet


@dataclass
class NormalFormCoefficients:
    h2: Jet
    h4: Jet
    trace_h2: Jet
    trace_h4: Jet
    boundary: Optional[BoundaryCoefficients] = field(default=None, repr=False)


def normalization_constant(level: int) -> int:
    """a_l^-1 = (-1)^l 2^(2(l-1)) ((l-1)!)^2."""
    return (-1) ** level * 2 ** (2 * (level - 1)) * math.factorial(level - 1) ** 2


def minimal_boundary_coefficients(epack: ExtrinsicPack, u4: Optional[U4Placeholder] = None) -> BoundaryCoefficients:
    """D, K, A, E, F of the induced metric along the minimal extension."""
    k, n = epack.k, epack.n
    if n == 4:
        raise InadmissibleError("boundary coefficients involve 1/(n-4) and are undefined for n = 4")
    u4 = u4 or U4Placeholder.zero(epack.codim)
    U = u4.as_jet(k, epack.order)
    hinv = epack.inverse
    L, H = epack.second_fundamental_form, epack.mean_curvature
    schouten_tt = epack.ambient_tensor("schouten", "tt")
    schouten_tn = epack.ambient_tensor("schouten", "tn")
    schouten_nn = epack.ambient_tensor("schouten", "nn")
    dschouten = epack.ambient_tensor("dschouten", "ttn")
    riemann_nttn = epack.ambient_tensor("riemann", "nttn")
    bach_tt = epack.ambient_tensor("bach", "tt")
    dH = mean_curvature_gradient(epack)
    HL = contract("ABP,P->AB", L, H)

    D = -HL - schouten_tt
    mixed = contract("CA,CD,DB->AB", HL, hinv, schouten_tt)
    transport = contract("AP,BP->AB", schouten_tn, dH)
    K = (
        contract("ABP,P->AB", L, U) * -2.0
        + contract("PABQ,P,Q->AB", riemann_nttn, H, H) * 0.25
        + contract("AC,CD,DB->AB", HL, hinv, HL) * 0.25
        - contract("ABP,P->AB", dschouten, H) * 0.5
        + mixed.symmetrize()
        + bach_tt * (1.0 / (4 * (4 - n)))
        + (contract("AC,CD,DB->AB", schouten_tt, hinv, schouten_tt) + contract("AP,BP->AB", schouten_tn, schouten_tn))
        * 0.25
        - transport.symmetrize()
        + contract("AP,BP->AB", dH, dH) * 0.25
    )
    A = contract("AP,P->A", schouten_tn, H) * -1.0 + contract("P,AP->A", H, dH) * 0.5
    E = contract("P,P->", H, H)
    F = contract("PQ,P,Q->", schouten_nn, H, H) * -1.0 + contract("P,P->", H, U) * 8.0
    return BoundaryCoefficients(D=D, K=K, A=A, E=E, F=F)


def to_normal_form(bc: BoundaryCoefficients, chart: InducedChart) -> NormalFormCoefficients:
    """h2 = D + E h / 2, h4 = K - nabla_(a A_b) / 2 + nabla^2 E / 8 + (F/4 - 3 E^2 / 16) h."""
    h = chart.metric
    h2 = bc.D + h * bc.E * 0.5
    h4 = (
        bc.K
        - chart.covariant_derivative(bc.A).symmetrize() * 0.5
        + chart.hessian(bc.E) * 0.125
        + h * (bc.F * 0.25 - bc.E * bc.E * (3.0 / 16.0))
    )
    return NormalFormCoefficients(h2=h2, h4=h4, trace_h2=chart.trace(h2), trace_h4=chart.trace(h4), boundary=bc)


def general_operator_coefficients(
    chart: InducedChart,
    h2: Jet,
    h4: Jet,
    n: Optional[int] = None,
    flavor: Flavor = Flavor.EXTRINSIC,
) -> OperatorCoefficients:
    """Q2 = -tr h2, T = -4 h2 + (k-2)(tr h2) h, Q4 = 8 tr h4 + Laplacian tr h2 - 4|h2|^2 + k/2 (tr h2)^2."""
    k = chart.k
    t2 = chart.trace(h2)
    t4 = chart.trace(h4)
    return OperatorCoefficients(
        k=k,
        n=n,
        flavor=flavor,
        chart=chart,
        q2=-t2,
        t=h2 * -4.0 + chart.metric * t2 * (k - 2),
        q4=t4 * 8.0 + chart.laplacian(t2) - chart.norm2(h2) * 4.0 + t2 * t2 * (k / 2),
    )


@dataclass
class PipelineResult:
    boundary: BoundaryCoefficients
    normal_form: NormalFormCoefficients
    coefficients: OperatorCoefficients


def pipeline_coefficients(epack: ExtrinsicPack, u4: Optional[U4Placeholder] = None) -> PipelineResult:
    bc = minimal_boundary_coefficients(epack, u4)
    nf = to_normal_form(bc, epack.chart)
    coeffs = general_operator_coefficients(epack.chart, nf.h2, nf.h4, n=epack.n)
    return PipelineResult(boundary=bc, normal_form=nf, coefficients=coeffs)


def pipeline_apply_p4(
    metric: MetricChart,
    embedding: Embedding,
    u4: Optional[U4Placeholder],
    f: Union[str, ExprNode],
    x: Sequence[float],
    order: int,
) -> float:
    """P4 f at x through boundary data and normal form, never using the closed-form coefficients."""
    require_admissible(embedding.k, embedding.n, 2)
    epack = extrinsic_pack(metric, embedding, x, order)
    return pipeline_coefficients(epack, u4).coefficients.apply(2, f)


@dataclass
class U4Report:
    h4_difference: float
    trace_h4_difference: Residual
    q4_difference: Residual
    p4_difference: Optional[Residual] = None

    def passed(self, tol: float) -> bool:
        checks = [self.h4_difference, self.trace_h4_difference.relative, self.q4_difference.relative]
        if self.p4_difference is not None:
            checks.append(self.p4_difference.relative)
        return max(checks) <= tol


def u4_perturbation(
    epack: ExtrinsicPack,
    u4a: U4Placeholder,
    u4b: U4Placeholder,
    f: Optional[Union[str, ExprNode]] = None,
) -> U4Report:
    """Compare the pipeline for two choices of U4 at one point."""
    first = pipeline_coefficients(epack, u4a)
    second = pipeline_coefficients(epack, u4b)
    delta = u4a.as_jet(epack.k, epack.order) - u4b.as_jet(epack.k, epack.order)
    predicted = contract("ABP,P->AB", epack.traceless, delta) * -2.0
    h4_gap = first.normal_form.h4 - second.normal_form.h4 - predicted

    def gap(a: Jet, b: Jet) -> Residual:
        return Residual(abs(float(a.value) - float(b.value)), abs(float(a.value)))

    p4 = None
    if f is not None:
        u = epack.chart.expand(f)
        p4 = gap(first.coefficients.apply_jet(2, u), second.coefficients.apply_jet(2, u))
    return U4Report(
        h4_difference=float(np.abs(h4_gap.value).max()),
        trace_h4_difference=gap(first.normal_form.trace_h4, second.normal_form.trace_h4),
        q4_difference=gap(first.coefficients.q4, second.coefficients.q4),
        p4_difference=p4,
    )


@dataclass
class TraceConsistencyReport:
    a_inverse: dict[int, int]
    q2_coefficient: float
    q4_coefficient: float
    q2_residual: float
    q4_residual: float

    def passed(self, tol: float = 1e-10) -> bool:
        return max(self.q2_residual, self.q4_residual) <= tol


def q_trace_consistency(chart: Optional[InducedChart] = None, eps: float = 1e-3) -> TraceConsistencyReport:
    """Recover the coefficients of tr h2 in Q2 and tr h4 in Q4 by perturbing along h."""
    chart = chart or InducedChart.flat(3, 4)
    k, h = chart.k, chart.metric
    h2, h4 = h * -0.5, h * (1.0 / 16.0)
    base = general_operator_coefficients(chart, h2, h4)
    bumped2 = general_operator_coefficients(chart, h2 + h * eps, h4)
    bumped4 = general_operator_coefficients(chart, h2, h4 + h * eps)
    q2_coefficient = (float(bumped2.q2.value) - float(base.q2.value)) / (k * eps)
    q4_coefficient = (float(bumped4.q4.value) - float(base.q4.value)) / (k * eps)
    a_inverse = {level: normalization_constant(level) for level in (1, 2, 3)}
    return TraceConsistencyReport(
        a_inverse=a_inverse,
        q2_coefficient=q2_coefficient,
        q4_coefficient=q4_coefficient,
        q2_residual=abs(q2_coefficient - 1 * a_inverse[1]),
        q4_residual=abs(q4_coefficient - 2 * a_inverse[2]),
    )


def poincare_coefficients(chart: InducedChart) -> tuple[Jet, Jet]:
    """h2 = -Pbar, h4 = (-Bbar/(k-4) + Pbar Pbar)/4 for the Poincare-Einstein filling of h."""
    k = chart.k
    if k == 4:
        raise InadmissibleError("Poincare coefficient h4 is undefined for k = 4")
    curvature = chart.curvature()
    schouten = curvature.require("schouten")
    bach = curvature.require("bach")
    square = contract("AC,CD,DB->AB", schouten, chart.inverse, schouten)
    return schouten * -1.0, (bach * (-1.0 / (k - 4)) + square) * 0.25


def apply_p4_expanded(chart: InducedChart, h2: Jet, h4: Jet, f: Union[str, ExprNode, Jet]) -> float:
    """P4 in expanded form.

    (Lap + k/2 tr h2)(Lap + (k-4)/2 tr h2) - 4 h2^ab nabla_a nabla_b
    - 4 (nabla_b h2^ab - nabla^a tr h2 / 2) nabla_a + 2(k-4)(2 tr h4 - |h2|^2)
    """
    k = chart.k
    u = chart.expand(f)
    t2, t4 = chart.trace(h2), chart.trace(h4)
    inner = chart.laplacian(u) + u * t2 * ((k - 4) / 2)
    outer = chart.laplacian(inner) + inner * t2 * (k / 2)
    second_order = contract("AB,AB->", chart.raise_both(h2), chart.hessian(u)) * -4.0
    dh2 = chart.covariant_derivative(h2)
    divergence = contract("AC,BD,CBD->A", chart.inverse, chart.inverse, dh2)
    drift = divergence - contract("AB,B->A", chart.inverse, t2.grad()) * 0.5
    first_order = contract("A,A->", drift, u.grad()) * -4.0
    zeroth = u * (t4 * 2.0 - chart.norm2(h2)) * (2.0 * (k - 4))
    return float((outer + second_order + first_order + zeroth).value)


def trace_identity_residual(epack: ExtrinsicPack, nf: Optional[NormalFormCoefficients] = None) -> Residual:
    """8 tr h4 against 2|P_tn - nabla H|^2 + 2|h2|^2 - 2 W HH - 4 C H - 2/(n-4) tr B."""
    nf = nf or pipeline_coefficients(epack).normal_form
    hinv, H = epack.inverse, epack.mean_curvature
    codazzi = epack.ambient_tensor("schouten", "tn") - mean_curvature_gradient(epack)
    rhs = (
        epack.norm2(codazzi, "tn") * 2.0
        + epack.chart.norm2(nf.h2) * 2.0
        - contract("AB,APBQ,P,Q->", hinv, epack.ambient_tensor("weyl", "tntn"), H, H) * 2.0
        - contract("AB,ABP,P->", hinv, epack.ambient_tensor("cotton", "ttn"), H) * 4.0
        - epack.chart.trace(epack.ambient_tensor("bach", "tt")) * (2.0 / (epack.n - 4))
    )
    lhs = nf.trace_h4 * 8.0
    return Residual(abs(float(lhs.value) - float(rhs.value)), abs(float(rhs.value)))


def closed_form_gap(epack: ExtrinsicPack, f: Union[str, ExprNode], u4: Optional[U4Placeholder] = None) -> Residual:
    """Pipeline P4 f against the closed-form route at the same point."""
    pipeline = pipeline_coefficients(epack, u4).coefficients.apply(2, f)
    closed = extrinsic_coefficients(epack).apply(2, f)
    return Residual(abs(pipeline - closed), abs(closed))
