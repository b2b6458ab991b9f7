"""
Extrinsic geometry of an embedding Sigma^k -> M^n at a point.

Every field is a jet in the chart variables x of Sigma. Tangential slots use the
coordinate frame T_a = d_a iota; normal slots use an orthonormal frame e_A obtained
by Gram-Schmidt, so normal indices are raised and lowered trivially.

Index conventions:
- L[a, b, A] = <nabla_{T_a} T_b, e_A>, H[A] = h^ab L[a, b, A] / k
- omega[a, A, B] = <e_A, nabla_a e_B> (normal connection)
- mixed derivatives append the derivative index last
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from gjms.errors import (
    DegenerateEmbeddingError,
    GeometrySpecError,
    InadmissibleError,
    JetOrderError,
    ParameterRangeError,
)
from gjms.geometry import (
    INDEX_LETTERS,
    CurvaturePack,
    MetricChart,
    check_positive_definite,
    christoffel_from_jets,
    covariant_derivative,
    curvature_from_jets,
    curvature_pack,
)
from gjms.jets import ExprNode, Jet, Restriction, as_expression, contract, evaluate, inverse, stack
from gjms.jets.expressions import Symbol, Scope

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Embedding:
    """n expressions iota(x) in the chart variables x1..xk of Sigma."""

    k: int
    n: int
    components: tuple[ExprNode, ...]

    def __post_init__(self):
        if not 1 <= self.k <= self.n - 1:
            raise ParameterRangeError(f"submanifold dimension k={self.k} must satisfy 1 <= k <= n-1 (n={self.n})")
        if len(self.components) != self.n:
            raise GeometrySpecError(f"embedding needs {self.n} components, got {len(self.components)}")
        allowed = {f"x{i + 1}" for i in range(self.k)}
        for entry in self.components:
            unknown = entry.symbols() - allowed
            if unknown:
                raise GeometrySpecError(f"embedding uses unknown identifiers {sorted(unknown)}")

    @classmethod
    def from_expressions(cls, k: int, components: Sequence[Union[str, ExprNode, float]]) -> "Embedding":
        return cls(k, len(components), tuple(as_expression(c) for c in components))

    @classmethod
    def from_graph(cls, k: int, graph: Sequence[Union[str, ExprNode, float]]) -> "Embedding":
        """x -> (x, u(x)) for a graph over the first k coordinates."""
        coords = tuple(Symbol(f"x{i + 1}") for i in range(k))
        return cls(k, k + len(graph), coords + tuple(as_expression(g) for g in graph))

    def evaluate(self, x: Sequence[float], order: int) -> Jet:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.k,):
            raise ParameterRangeError(f"chart point has shape {x.shape}, expected ({self.k},)")
        scope = Scope(x, order)
        return stack([scope.evaluate(c) for c in self.components])


class InducedChart:
    """Calculus of a jet-valued metric h on a k-dimensional chart.

    ``point`` is the chart point the jets are expanded at and ``function_order`` the
    order at which test functions are expanded there.
    """

    def __init__(self, metric: Jet, point: Optional[Sequence[float]] = None, function_order: Optional[int] = None):
        check_positive_definite(metric, "induced metric")
        self.metric = metric
        self.inverse = inverse(metric)
        self.christoffel_lower, self.christoffel = christoffel_from_jets(metric, self.inverse)
        self.point = None if point is None else np.asarray(point, dtype=float)
        self.function_order = metric.order if function_order is None else function_order
        self._curvature: Optional[CurvaturePack] = None

    @classmethod
    def from_metric(cls, chart: MetricChart, point: Sequence[float], order: int) -> "InducedChart":
        return cls(chart.evaluate(point, order), point, order)

    @classmethod
    def flat(cls, k: int, order: int, point: Optional[Sequence[float]] = None) -> "InducedChart":
        point = np.zeros(k) if point is None else point
        return cls(Jet.constant(np.eye(k), k, order), point, order)

    def expand(self, f: Union[str, ExprNode, Jet]) -> Jet:
        """A function on the chart as a jet at the chart point."""
        if isinstance(f, Jet):
            return f
        if self.point is None:
            raise ParameterRangeError("the chart has no expansion point")
        return evaluate(as_expression(f), self.point, self.function_order)

    @property
    def k(self) -> int:
        return self.metric.shape[0]

    @property
    def order(self) -> int:
        return self.metric.order

    def hessian(self, u: Jet) -> Jet:
        if u.ndim:
            raise ParameterRangeError("hessian expects a scalar function")
        return covariant_derivative(u.grad(), self.christoffel)

    def laplacian(self, u: Jet) -> Jet:
        return self.trace(self.hessian(u))

    def divergence(self, form: Jet) -> Jet:
        """nabla^a V_a for a 1-form V."""
        return contract("ab,ab->", self.inverse, covariant_derivative(form, self.christoffel))

    def covariant_derivative(self, tensor: Jet) -> Jet:
        return covariant_derivative(tensor, self.christoffel)

    def trace(self, tensor: Jet) -> Jet:
        return contract("ab,ab->", self.inverse, tensor)

    def norm2(self, tensor: Jet) -> Jet:
        """|T|^2 of an all-lower tangential tensor."""
        return tensor_norm2(tensor, "t" * tensor.ndim, self.inverse)

    def raise_both(self, tensor: Jet) -> Jet:
        return contract("ac,bd,cd->ab", self.inverse, self.inverse, tensor)

    def curvature(self) -> CurvaturePack:
        """Intrinsic curvature of h (Bach whenever the jet order allows it)."""
        if self._curvature is None:
            self._curvature = curvature_from_jets(self.metric)
        return self._curvature


def tensor_norm2(tensor: Jet, slots: str, metric_inverse: Jet) -> Jet:
    """Full contraction of a tensor with itself; tangential slots raised with h^-1."""
    letters = INDEX_LETTERS[: tensor.ndim]
    raised = tensor
    for i, s in enumerate(slots):
        if s == "t":
            replaced = letters[:i] + "p" + letters[i + 1 :]
            raised = contract(f"{letters[i]}p,{replaced}->{letters}", metric_inverse, raised)
    return contract(f"{letters},{letters}->", raised, tensor)


def intrinsic_curvature(chart: InducedChart) -> CurvaturePack:
    return chart.curvature()


@dataclass
class ExtrinsicPack:
    """Induced metric, frames and extrinsic curvature of Sigma at one chart point."""

    x: np.ndarray
    point: np.ndarray
    k: int
    n: int
    order: int
    ambient: CurvaturePack
    restriction: Restriction
    embedding: Jet
    tangent: Jet
    chart: InducedChart
    normal: Jet
    normal_lower: Jet
    second_fundamental_form: Jet
    mean_curvature: Jet
    traceless: Jet
    normal_connection: Jet
    bindings: dict = field(default_factory=dict)
    _restricted: dict = field(default_factory=dict, repr=False)
    _projected: dict = field(default_factory=dict, repr=False)

    @property
    def metric(self) -> Jet:
        return self.chart.metric

    @property
    def inverse(self) -> Jet:
        return self.chart.inverse

    @property
    def codim(self) -> int:
        return self.n - self.k

    def restricted(self, name: str) -> Jet:
        """An ambient curvature field pulled back to a jet in x."""
        if name not in self._restricted:
            self._restricted[name] = self.restriction(self.ambient.require(name))
        return self._restricted[name]

    def restrict_expression(self, expr: Union[str, ExprNode]) -> Jet:
        """An ambient function, e.g. a conformal factor, as a jet in x."""
        return self.restriction(evaluate(expr, self.point, self.order, self.bindings))

    def frame(self, slot: str) -> Jet:
        if slot == "t":
            return self.tangent
        if slot == "n":
            return self.normal
        raise ParameterRangeError(f"unknown slot type {slot!r}")

    def project(self, tensor: Jet, slots: str) -> Jet:
        """Frame components of a lower-index ambient tensor field along Sigma."""
        if len(slots) != tensor.ndim:
            raise ParameterRangeError(f"slot string {slots!r} does not match rank {tensor.ndim}")
        letters = INDEX_LETTERS[: tensor.ndim]
        result = tensor
        for i, s in enumerate(slots):
            target = letters[:i] + "z" + letters[i + 1 :]
            result = contract(f"{letters},{letters[i]}z->{target}", result, self.frame(s))
        return result

    def ambient_tensor(self, name: str, slots: str) -> Jet:
        key = (name, slots)
        if key not in self._projected:
            self._projected[key] = self.project(self.restricted(name), slots)
        return self._projected[key]

    def norm2(self, tensor: Jet, slots: str) -> Jet:
        return tensor_norm2(tensor, slots, self.inverse)


def _normal_frame(g: Jet, tangent: Jet, h_inverse: Jet) -> Jet:
    """Orthonormal normal frame by Gram-Schmidt over ambient coordinate vectors.

    Each step takes the coordinate vector with the largest normal residual at the
    point; ties go to the lowest index.
    """
    n, k = tangent.shape
    g0, t0, hinv0 = g.value, tangent.value, h_inverse.value
    tangential0 = t0 @ hinv0 @ t0.T @ g0
    chosen: list[Jet] = []
    chosen0: list[np.ndarray] = []
    remaining = list(range(n))
    for _ in range(n - k):
        best, best_norm = None, -1.0
        for c in remaining:
            v = np.eye(n)[c] - tangential0[:, c]
            for e in chosen0:
                v = v - e * (e @ g0 @ v)
            norm = float(v @ g0 @ v)
            if norm > best_norm:
                best, best_norm = c, norm
        if best_norm <= RANK_TOLERANCE**2:
            raise DegenerateEmbeddingError("cannot complete a normal frame at the point")
        logger.debug(f"Normal frame pivot: coordinate {best + 1}, residual {best_norm:.3e}")
        remaining.remove(best)
        v = Jet.constant(np.eye(n)[best], g.dim, g.order)
        weights = contract("aA,ab,b->A", tangent, g, v)
        v = v - contract("aA,AB,B->a", tangent, h_inverse, weights)
        for e in chosen:
            v = v - e * contract("ab,a,b->", g, e, v)
        e = v / contract("ab,a,b->", g, v, v).sqrt()
        chosen.append(e)
        chosen0.append(e.value)
    return stack(chosen, axis=0).T


def extrinsic_pack(metric: MetricChart, embedding: Embedding, x: Sequence[float], order: int) -> ExtrinsicPack:
    """Extrinsic data of Sigma at chart point ``x`` from jets of the given order."""
    if metric.n != embedding.n:
        raise GeometrySpecError(f"embedding lands in dimension {embedding.n}, metric has {metric.n}")
    if order < 2:
        raise JetOrderError(f"second fundamental form needs jet order >= 2, got {order}")
    x = np.asarray(x, dtype=float)
    iota = embedding.evaluate(x, order)
    point = iota.value
    ambient = curvature_pack(metric, point, order)
    restriction = Restriction(iota)
    g = restriction(ambient.metric)
    gamma = restriction(ambient.christoffel)
    tangent = iota.grad()
    singular = np.linalg.svd(tangent.value, compute_uv=False)
    if singular.min() <= RANK_TOLERANCE * max(1.0, singular.max()):
        raise DegenerateEmbeddingError(f"embedding Jacobian is rank deficient at x={x.tolist()}")
    h = contract("ab,aA,bB->AB", g, tangent, tangent)
    chart = InducedChart(h, x, order)
    normal = _normal_frame(g, tangent, chart.inverse)
    normal_lower = contract("ab,bA->aA", g, normal)
    acceleration = tangent.grad() + contract("bcd,cA,dB->bAB", gamma, tangent, tangent)
    L = contract("bP,bAB->ABP", normal_lower, acceleration)
    H = contract("AB,ABP->P", chart.inverse, L) * (1.0 / embedding.k)
    traceless = L - contract("AB,P->ABP", h, H)
    nabla_normal = normal.grad() + contract("bcd,cA,dP->bPA", gamma, tangent, normal)
    omega = contract("bP,bQA->APQ", normal_lower, nabla_normal)
    logger.debug(f"Extrinsic pack k={embedding.k} n={embedding.n} order={order} at x={x.tolist()}")
    return ExtrinsicPack(
        x=x,
        point=point,
        k=embedding.k,
        n=embedding.n,
        order=order,
        ambient=ambient,
        restriction=restriction,
        embedding=iota,
        tangent=tangent,
        chart=chart,
        normal=normal,
        normal_lower=normal_lower,
        second_fundamental_form=L,
        mean_curvature=H,
        traceless=traceless,
        normal_connection=omega,
        bindings=metric.bindings,
    )


def mixed_covariant_derivative(tensor: Jet, slots: str, epack: ExtrinsicPack) -> Jet:
    """nabla_a of a section of (T*Sigma)^p (x) (N Sigma)^q with the induced connections.

    ``slots`` gives the kind of each index ("t" tangential lower, "n" normal frame
    component); the derivative index is appended last.
    """
    if len(slots) != tensor.ndim:
        raise ParameterRangeError(f"slot string {slots!r} does not match rank {tensor.ndim}")
    if tensor.order < 1:
        raise JetOrderError("mixed covariant derivative needs jet order >= 1")
    letters = INDEX_LETTERS[: tensor.ndim]
    result = tensor.grad()
    for i, s in enumerate(slots):
        replaced = letters[:i] + "p" + letters[i + 1 :]
        if s == "t":
            result = result - contract(f"pm{letters[i]},{replaced}->{letters}m", epack.chart.christoffel, tensor)
        else:
            result = result + contract(f"m{letters[i]}p,{replaced}->{letters}m", epack.normal_connection, tensor)
    return result


def mean_curvature_gradient(epack: ExtrinsicPack) -> Jet:
    """nabla_a H_A with index order [a, A]."""
    return mixed_covariant_derivative(epack.mean_curvature, "n", epack).T


@dataclass
class FialkowPack:
    k: int
    G: Jet
    D: Jet
    F: Optional[Jet] = None


def fialkow_pack(epack: ExtrinsicPack) -> FialkowPack:
    """G = (|L0|^2 - W_ab^ab)/(2(k-1)), D = (nabla^b L0_abA + W_abA^b)/(1-k), F for k >= 3."""
    k = epack.k
    if k < 2:
        raise InadmissibleError(f"Fialkow data need k >= 2, got k={k}")
    hinv, h = epack.inverse, epack.metric
    traceless = epack.traceless
    weyl_tttt = epack.ambient_tensor("weyl", "tttt")
    weyl_trace = contract("AC,BD,ABCD->", hinv, hinv, weyl_tttt)
    G = (epack.norm2(traceless, "ttn") - weyl_trace) * (1.0 / (2 * (k - 1)))
    dtraceless = mixed_covariant_derivative(traceless, "ttn", epack)
    divergence = contract("BC,ABPC->AP", hinv, dtraceless)
    weyl_ttnt = epack.ambient_tensor("weyl", "ttnt")
    D = (divergence + contract("BC,ABPC->AP", hinv, weyl_ttnt)) * (1.0 / (1 - k))
    F = None
    if k >= 3:
        square = contract("ACP,BDP,CD->AB", traceless, traceless, hinv)
        ricci_like = contract("CD,ACBD->AB", hinv, weyl_tttt)
        F = (square - ricci_like - h * G) * (1.0 / (k - 2))
    return FialkowPack(k=k, G=G, D=D, F=F)


@dataclass
class GaussCodazziResiduals:
    trace: float
    codazzi: float
    gauss: Optional[float] = None


def _max_abs(jet: Jet) -> float:
    return float(np.abs(jet.value).max()) if jet.ndim else abs(float(jet.value))


def gauss_codazzi_residuals(
    epack: ExtrinsicPack,
    fpack: Optional[FialkowPack] = None,
    intrinsic: Optional[CurvaturePack] = None,
) -> GaussCodazziResiduals:
    """Residuals of the traced Gauss equation, the Codazzi relation and (k >= 3) the Gauss relation."""
    k = epack.k
    if k < 2:
        raise InadmissibleError(f"Gauss-Codazzi relations need k >= 2, got k={k}")
    fpack = fpack or fialkow_pack(epack)
    intrinsic = intrinsic or epack.chart.curvature()
    H, L, h = epack.mean_curvature, epack.second_fundamental_form, epack.metric
    schouten_tt = epack.ambient_tensor("schouten", "tt")
    H2 = contract("P,P->", H, H)
    trace_lhs = epack.chart.trace(schouten_tt) + H2 * (k / 2)
    trace_res = _max_abs(trace_lhs - intrinsic.J - fpack.G)
    codazzi_lhs = epack.ambient_tensor("schouten", "tn") - mean_curvature_gradient(epack)
    codazzi_res = _max_abs(codazzi_lhs - fpack.D)
    gauss_res = None
    if k >= 3:
        gauss_lhs = schouten_tt + contract("ABP,P->AB", L, H) - h * H2 * 0.5
        gauss_res = _max_abs(gauss_lhs - intrinsic.require("schouten") - fpack.F)
    return GaussCodazziResiduals(trace=trace_res, codazzi=codazzi_res, gauss=gauss_res)
