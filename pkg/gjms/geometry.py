"""
Riemannian tensor calculus on one coordinate chart, jet valued.

Conventions:
- R_ijkl = <R(d_k, d_l) d_j, d_i>, so the unit sphere has R_ijkl = g_ik g_jl - g_il g_jk
- Ric_jl = g^ik R_ijkl, scalar R = g^jl Ric_jl
- Schouten P = (Ric - R/(2(n-1)) g)/(n-2), J = tr P = R/(2(n-1))
- R = W + P o g with (P o g)_ijkl = P_ik g_jl - P_jk g_il - P_il g_jk + P_jl g_ik
- Cotton C_ijk = nabla_k P_ij - nabla_j P_ik
- Bach B_ij = nabla^k C_ijk - P^kl W_kijl

Derivative indices are appended last, e.g. dP[i, j, k] = nabla_k P_ij.
A jet of order J for g yields Riemann at order J-2 and Bach at order J-4.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from gjms.errors import GeometrySpecError, JetOrderError, ParameterRangeError, SingularMetricError
from gjms.jets import ExprNode, Jet, as_expression, contract, exp_of, inverse, product
from gjms.jets.expressions import Num, Scope, is_zero

logger = logging.getLogger(__name__)

INDEX_LETTERS = "abcdefgh"


@dataclass(frozen=True)
class MetricChart:
    """Metric components g_ij(z) as expressions on a single chart.

    ``bindings`` maps identifier names to coordinate positions; ``x1..xn`` are always
    bound, extra entries (such as ``u1`` for ``x(k+1)``) are aliases.
    """

    n: int
    components: tuple[tuple[ExprNode, ...], ...]
    aliases: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.n < 2:
            raise ParameterRangeError(f"metric dimension {self.n} is below 2")
        if len(self.components) != self.n or any(len(row) != self.n for row in self.components):
            raise GeometrySpecError(f"metric must be {self.n}x{self.n}")
        for i in range(self.n):
            for j in range(i):
                if self.components[i][j] is not self.components[j][i] and str(self.components[i][j]) != str(
                    self.components[j][i]
                ):
                    raise GeometrySpecError(f"metric entries ({i + 1},{j + 1}) and ({j + 1},{i + 1}) differ")
        allowed = set(self.bindings)
        for row in self.components:
            for entry in row:
                unknown = entry.symbols() - allowed
                if unknown:
                    raise GeometrySpecError(f"metric uses unknown identifiers {sorted(unknown)}")

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Sequence[Union[str, ExprNode, float, None]]],
        aliases: Mapping[str, int] | None = None,
    ) -> "MetricChart":
        """Build a chart from rows; entries below the diagonal may be ``None`` or omitted."""
        n = len(rows)
        grid: list[list[Optional[ExprNode]]] = [[None] * n for _ in range(n)]
        for i, row in enumerate(rows):
            offset = 0 if len(row) == n else i
            if len(row) not in (n, n - i):
                raise GeometrySpecError(f"metric row {i + 1} has {len(row)} entries, expected {n} or {n - i}")
            for j, entry in enumerate(row):
                if entry is not None:
                    grid[i][j + offset] = as_expression(entry)
        for i in range(n):
            for j in range(n):
                if grid[i][j] is None:
                    grid[i][j] = grid[j][i]
                if grid[i][j] is None:
                    raise GeometrySpecError(f"metric entry ({i + 1},{j + 1}) is missing")
        return cls(n, tuple(tuple(row) for row in grid), tuple(sorted((aliases or {}).items())))

    @classmethod
    def conformally_flat(cls, n: int, factor: Union[str, ExprNode]) -> "MetricChart":
        factor = as_expression(factor)
        zero = Num(0.0)
        return cls(n, tuple(tuple(factor if i == j else zero for j in range(n)) for i in range(n)))

    @property
    def bindings(self) -> dict[str, int]:
        names = {f"x{i + 1}": i for i in range(self.n)}
        names.update(dict(self.aliases))
        return names

    def evaluate(self, point: Sequence[float], order: int) -> Jet:
        """Jet of g_ij at ``point`` with shape (n, n)."""
        point = np.asarray(point, dtype=float)
        if point.shape != (self.n,):
            raise ParameterRangeError(f"point has shape {point.shape}, expected ({self.n},)")
        scope = Scope(point, order, self.bindings)
        coeffs = np.zeros((self.n, self.n, scope.constant(0.0).coeffs.shape[-1]))
        for i in range(self.n):
            for j in range(i, self.n):
                entry = self.components[i][j]
                if is_zero(entry):
                    continue
                coeffs[i, j] = coeffs[j, i] = scope.evaluate(entry).coeffs
        return Jet(coeffs, self.n)


def conformal_metric(metric: MetricChart, omega: Union[str, ExprNode]) -> MetricChart:
    """The chart of e^{2 omega} g, as expression products."""
    omega = as_expression(omega)
    factor = exp_of(product(Num(2.0), omega))
    rows = tuple(
        tuple(entry if is_zero(entry) else product(factor, entry) for entry in row) for row in metric.components
    )
    return MetricChart(metric.n, rows, metric.aliases)


def covariant_derivative(tensor: Jet, christoffel: Jet) -> Jet:
    """nabla of an all-lower-index tensor; the derivative index is appended last."""
    rank = tensor.ndim
    letters = INDEX_LETTERS[:rank]
    result = tensor.grad()
    for slot in range(rank):
        replaced = letters[:slot] + "p" + letters[slot + 1 :]
        result = result - contract(f"pm{letters[slot]},{replaced}->{letters}m", christoffel, tensor)
    return result


def raise_index(tensor: Jet, inverse_metric: Jet, slot: int) -> Jet:
    letters = INDEX_LETTERS[: tensor.ndim]
    replaced = letters[:slot] + "p" + letters[slot + 1 :]
    return contract(f"{letters[slot]}p,{replaced}->{letters}", inverse_metric, tensor)


def lower_index(tensor: Jet, metric: Jet, slot: int) -> Jet:
    return raise_index(tensor, metric, slot)


def kulkarni_nomizu(schouten: Jet, metric: Jet) -> Jet:
    """(P o g)_ijkl = P_ik g_jl - P_jk g_il - P_il g_jk + P_jl g_ik."""
    outer = contract("ik,jl->ijkl", schouten, metric)
    return outer - outer.einsum("jikl->ijkl") - outer.einsum("ijlk->ijkl") + outer.einsum("jilk->ijkl")


@dataclass
class CurvaturePack:
    """Ambient tensors at one point; Schouten-level fields need n >= 3, Bach needs order >= 4."""

    metric: Jet
    inverse: Jet
    christoffel_lower: Jet
    christoffel: Jet
    riemann: Jet
    ricci: Jet
    scalar: Jet
    J: Jet
    schouten: Optional[Jet] = None
    weyl: Optional[Jet] = None
    dschouten: Optional[Jet] = None
    cotton: Optional[Jet] = None
    bach: Optional[Jet] = None
    point: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.metric.shape[0]

    def require(self, name: str) -> Jet:
        value = getattr(self, name)
        if value is None:
            raise JetOrderError(f"{name} is unavailable (dimension {self.n}, metric jet order {self.metric.order})")
        return value

    def covariant_hessian(self, f: Jet) -> Jet:
        return covariant_derivative(f.grad(), self.christoffel)

    def decomposition_residual(self) -> float:
        """max |R - W - P o g| at the point."""
        pg = kulkarni_nomizu(self.require("schouten"), self.metric)
        return float(np.abs((self.riemann - self.require("weyl") - pg).value).max())

    def bianchi_residual(self) -> float:
        r = self.riemann
        cyclic = r + r.einsum("iljk->ijkl") + r.einsum("iklj->ijkl")
        return float(np.abs(cyclic.value).max())


def check_positive_definite(metric: Jet, what: str = "metric") -> None:
    try:
        np.linalg.cholesky(metric.value)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError(f"{what} is not positive definite at the point") from exc


def christoffel_from_jets(metric: Jet, metric_inverse: Jet) -> tuple[Jet, Jet]:
    """Gamma_abc = (d_b g_ac + d_c g_ab - d_a g_bc)/2 and Gamma^k_ij = g^ka Gamma_aij."""
    dg = metric.grad()
    lower = (dg.einsum("acb->abc") + dg - dg.einsum("bca->abc")) * 0.5
    upper = contract("ka,aij->kij", metric_inverse, lower)
    return lower, upper


def curvature_from_jets(metric: Jet, *, bach: Optional[bool] = None, point=None) -> CurvaturePack:
    """All curvature tensors of a jet-valued metric.

    ``bach=None`` computes the Bach tensor whenever the jet order allows it.
    """
    n = metric.shape[0]
    if metric.order < 2:
        raise JetOrderError(f"curvature needs a metric jet of order >= 2, got {metric.order}")
    if bach and metric.order < 4:
        raise JetOrderError(f"Bach tensor needs a metric jet of order >= 4, got {metric.order}")
    check_positive_definite(metric)
    ginv = inverse(metric)
    lower, upper = christoffel_from_jets(metric, ginv)
    dlower = lower.grad()
    riemann = (
        dlower.einsum("iljk->ijkl")
        - dlower.einsum("ikjl->ijkl")
        + contract("mkj,mli->ijkl", upper, lower)
        - contract("mlj,mki->ijkl", upper, lower)
    )
    ricci = contract("ik,ijkl->jl", ginv, riemann)
    scalar = contract("jl,jl->", ginv, ricci)
    pack = CurvaturePack(
        metric=metric,
        inverse=ginv,
        christoffel_lower=lower,
        christoffel=upper,
        riemann=riemann,
        ricci=ricci,
        scalar=scalar,
        J=scalar * (1.0 / (2 * (n - 1))),
        point=None if point is None else np.asarray(point, dtype=float),
    )
    if n < 3:
        return pack
    schouten = (ricci - scalar * metric * (1.0 / (2 * (n - 1)))) * (1.0 / (n - 2))
    pack.schouten = schouten
    pack.weyl = riemann - kulkarni_nomizu(schouten, metric)
    if metric.order < 3:
        return pack
    dschouten = covariant_derivative(schouten, upper)
    pack.dschouten = dschouten
    pack.cotton = dschouten - dschouten.einsum("ikj->ijk")
    if bach is False or metric.order < 4:
        return pack
    dcotton = covariant_derivative(pack.cotton, upper)
    schouten_up = contract("ka,lb,ab->kl", ginv, ginv, schouten)
    pack.bach = contract("kl,ijkl->ij", ginv, dcotton) - contract("kl,kijl->ij", schouten_up, pack.weyl)
    return pack


def christoffel(metric: MetricChart, point: Sequence[float], order: int) -> Jet:
    """Gamma^k_ij at ``point`` from a metric jet of the given order."""
    if order < 1:
        raise JetOrderError("Christoffel symbols need a metric jet of order >= 1")
    g = metric.evaluate(point, order)
    check_positive_definite(g)
    return christoffel_from_jets(g, inverse(g))[1]


def curvature_pack(metric: MetricChart, point: Sequence[float], order: int, *, bach: Optional[bool] = None) -> CurvaturePack:
    """Curvature of a chart at ``point``; ``order`` is the metric jet order."""
    g = metric.evaluate(point, order)
    logger.debug(f"Curvature pack n={metric.n} order={order} at {np.asarray(point).tolist()}")
    return curvature_from_jets(g, bach=bach, point=point)


def conformal_schouten(pack: CurvaturePack, omega: Jet) -> Jet:
    """P - nabla^2 omega + d omega (x) d omega - |d omega|^2 g / 2, the Schouten tensor of e^{2 omega} g."""
    domega = omega.grad()
    square = contract("ij,i,j->", pack.inverse, domega, domega)
    return (
        pack.require("schouten")
        - pack.covariant_hessian(omega)
        + contract("i,j->ij", domega, domega)
        - pack.metric * square * 0.5
    )


def einstein_residual(pack: CurvaturePack, lam: float) -> float:
    """max |Ric - lam (n-1) g| at the point."""
    return float(np.abs((pack.ricci - pack.metric * (lam * (pack.n - 1))).value).max())
