"""
Factorization of the extrinsic operators for minimal Sigma in an Einstein ambient
with Ric = lam (n-1) g:

    P_2l = prod_{j=1..l} (-Laplacian + lam c_j),   c_j = (k/2 + j - 1)(k/2 - j)

and its spectral and Q-curvature consequences. Rational inputs give exact
``Fraction`` results when ``exact=True``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from gjms.errors import JetOrderError, ParameterRangeError
from gjms.geometry import MetricChart
from gjms.jets import ExprNode, Jet
from gjms.submanifold import InducedChart

logger = logging.getLogger(__name__)

Scalar = Union[int, float, Fraction]


def _check(k: int, level: int) -> None:
    if k < 1 or level < 1:
        raise ParameterRangeError(f"need k >= 1 and level >= 1, got k={k}, level={level}")


def _rational(value: Scalar) -> Scalar:
    return Fraction(value) if isinstance(value, (int, Fraction)) else value


def c_coefficients(k: int, level: int, *, exact: bool = False) -> list[Scalar]:
    """c_j = (k/2 + j - 1)(k/2 - j) for j = 1..level."""
    _check(k, level)
    half = Fraction(k, 2)
    values = [(half + j - 1) * (half - j) for j in range(1, level + 1)]
    return values if exact else [float(v) for v in values]


def q_closed_form(k: int, level: int, lam: Scalar = 1, *, exact: bool = False) -> Scalar:
    """Q_2l = lam^l prod_{j=1..2l-1} (k/2 - l + j); lam^{k/2} (k-1)! in the critical case."""
    _check(k, level)
    half = Fraction(k, 2)
    product = Fraction(1)
    for j in range(1, 2 * level):
        product *= half - level + j
    lam = _rational(lam)
    value = lam**level * product
    if exact and isinstance(value, Fraction):
        return value
    return float(value)


def sphere_eigenvalue(k: int, m: int, level: int, lam: Scalar = 1, *, exact: bool = False) -> Scalar:
    """Eigenvalue of P_2l on degree-m spherical harmonics of the round k-sphere of Einstein constant lam."""
    if m < 0:
        raise ParameterRangeError(f"harmonic degree must be non-negative, got {m}")
    lam = _rational(lam)
    value = Fraction(1) if isinstance(lam, Fraction) else 1.0
    for c in c_coefficients(k, level, exact=True):
        value *= lam * m * (m + k - 1) + lam * c
    if exact and isinstance(value, Fraction):
        return value
    return float(value)


def canonical_family_coefficients(lam: float, h: Optional[Jet] = None):
    """(h2, h4) of the canonical Einstein filling (1 - lam r^2/4)^2 h.

    Returns tensors when ``h`` is given and the scalar multipliers otherwise.
    """
    a2, a4 = -lam / 2, lam * lam / 16
    if h is None:
        return a2, a4
    return h * a2, h * a4


@dataclass(frozen=True)
class FactorizationSpec:
    k: int
    level: int
    lam: float
    c: tuple[float, ...]

    @classmethod
    def build(cls, k: int, level: int, lam: float = 1.0) -> "FactorizationSpec":
        return cls(k=k, level=level, lam=float(lam), c=tuple(c_coefficients(k, level)))

    def apply_jet(self, chart: InducedChart, u: Jet) -> Jet:
        if u.order < 2 * self.level:
            raise JetOrderError(f"factorized operator of level {self.level} needs jet order >= {2 * self.level}")
        for c in self.c:
            u = -chart.laplacian(u) + u * (self.lam * c)
        return u


def factorized_apply(
    chart: Union[InducedChart, MetricChart],
    lam: float,
    level: int,
    f: Union[str, ExprNode, Jet],
    x: Optional[Sequence[float]] = None,
    order: Optional[int] = None,
) -> float:
    """prod_j (-Laplacian_h + lam c_j) f at the chart point."""
    if isinstance(chart, MetricChart):
        if x is None or order is None:
            raise ParameterRangeError("a point and jet order are needed to expand a metric chart")
        chart = InducedChart.from_metric(chart, x, order)
    spec = FactorizationSpec.build(chart.k, level, lam)
    return float(spec.apply_jet(chart, chart.expand(f)).value)
