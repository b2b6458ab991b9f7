"""
Truncated multivariate Taylor series ("jets").

A jet of order J in d variables stores c_I = d^I f(x0) / I! for every multi-index
|I| <= J, laid out in graded order: degree ascending, lexicographically descending
inside a degree. Tables for lower orders are prefixes of tables for higher orders,
so truncation is a slice of the coefficient axis.

Jets are tensor valued. ``coeffs`` has shape ``(*shape, size)``; component axes
broadcast like numpy arrays and the last axis is always the coefficient axis.
Binary operations between jets of different order truncate to the smaller one.
"""

from __future__ import annotations

import logging
import math
import string
from functools import lru_cache
from typing import Iterator, Sequence, Union

import numpy as np

from gjms.errors import JetDomainError, JetOrderError, ParameterRangeError, SingularMetricError

logger = logging.getLogger(__name__)

# Upper bound on floats materialized per product chunk.
CHUNK_ELEMENTS = 1 << 22

Number = Union[int, float, np.floating, np.integer]


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def table_size(dim: int, order: int) -> int:
    """Number of multi-indices of degree <= order in dim variables."""
    return math.comb(dim + order, order)


class MultiIndexTable:
    """Monomial bookkeeping for jets in ``dim`` variables truncated at ``order``."""

    def __init__(self, dim: int, order: int):
        if dim < 1 or order < 0:
            raise ParameterRangeError(f"invalid jet table: dim={dim}, order={order}")
        self.dim = dim
        self.order = order
        monomials = [m for d in range(order + 1) for m in _compositions(d, dim)]
        self.monomials = np.array(monomials, dtype=np.int64).reshape(len(monomials), dim)
        self.index = {m: i for i, m in enumerate(monomials)}
        self.size = len(monomials)
        self.degree = self.monomials.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in m) for m in monomials], dtype=float
        )
        self._build_products(monomials)
        self._chunk_cache: dict[int, list[tuple[slice, slice, np.ndarray]]] = {}
        self._derivative_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        logger.debug(f"Built jet table dim={dim} order={order}: {self.size} monomials, {len(self.left)} products")

    def _build_products(self, monomials: list[tuple[int, ...]]) -> None:
        left, right, target = [], [], []
        for i, a in enumerate(monomials):
            remaining = self.order - int(self.degree[i])
            for j in range(table_size(self.dim, remaining)):
                b = monomials[j]
                left.append(i)
                right.append(j)
                target.append(self.index[tuple(x + y for x, y in zip(a, b))])
        target_arr = np.array(target, dtype=np.int64)
        ordering = np.argsort(target_arr, kind="stable")
        self.left = np.array(left, dtype=np.int64)[ordering]
        self.right = np.array(right, dtype=np.int64)[ordering]
        self.target = target_arr[ordering]
        # Every target owns at least the pair (constant, itself).
        self.starts = np.searchsorted(self.target, np.arange(self.size))
        self.ends = np.append(self.starts[1:], len(self.target))

    def chunks(self, rows: int) -> list[tuple[slice, slice, np.ndarray]]:
        """Split the product pairs into groups of whole targets sized for ``rows`` components."""
        budget = max(1, CHUNK_ELEMENTS // max(rows, 1))
        bucket = 1 << max(0, budget.bit_length() - 1)
        if bucket in self._chunk_cache:
            return self._chunk_cache[bucket]
        result = []
        first, acc = 0, 0
        for t in range(self.size):
            group = int(self.ends[t] - self.starts[t])
            if acc and acc + group > bucket:
                result.append(self._chunk(first, t))
                first, acc = t, 0
            acc += group
        result.append(self._chunk(first, self.size))
        self._chunk_cache[bucket] = result
        return result

    def _chunk(self, first: int, stop: int) -> tuple[slice, slice, np.ndarray]:
        lo, hi = int(self.starts[first]), int(self.ends[stop - 1])
        return slice(lo, hi), slice(first, stop), self.starts[first:stop] - lo

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise (broadcast) truncated product of coefficient arrays."""
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        out = np.empty(shape + (self.size,))
        for pairs, targets, local in self.chunks(math.prod(shape)):
            prod = a[..., self.left[pairs]] * b[..., self.right[pairs]]
            out[..., targets] = np.add.reduceat(prod, local, axis=-1)
        return out

    def contract(self, spec: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Index contraction ``spec`` (einsum notation on component axes) with jet products."""
        inputs, output = spec.split("->")
        sa, sb = inputs.split(",")
        letter = _free_letter(spec)
        sizes = dict(zip(sa, a.shape[:-1]))
        sizes.update(zip(sb, b.shape[:-1]))
        rows = max(
            math.prod(a.shape[:-1]),
            math.prod(b.shape[:-1]),
            math.prod(sizes[c] for c in output),
        )
        einsum_spec = f"{sa}{letter},{sb}{letter}->{output}{letter}"
        out = np.empty(tuple(sizes[c] for c in output) + (self.size,))
        for pairs, targets, local in self.chunks(rows):
            prod = np.einsum(einsum_spec, a[..., self.left[pairs]], b[..., self.right[pairs]])
            out[..., targets] = np.add.reduceat(prod, local, axis=-1)
        return out

    def derivative_map(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Source indices and factors mapping this table to d/dx_var in the table one order lower."""
        if var in self._derivative_cache:
            return self._derivative_cache[var]
        lower = get_table(self.dim, self.order - 1)
        source = np.empty(lower.size, dtype=np.int64)
        factor = np.empty(lower.size)
        for q, row in enumerate(lower.monomials):
            up = [int(e) for e in row]
            up[var] += 1
            source[q] = self.index[tuple(up)]
            factor[q] = up[var]
        self._derivative_cache[var] = (source, factor)
        return source, factor


@lru_cache(maxsize=None)
def get_table(dim: int, order: int) -> MultiIndexTable:
    return MultiIndexTable(dim, order)


@lru_cache(maxsize=None)
def order_for_size(dim: int, size: int) -> int:
    order = 0
    while table_size(dim, order) < size:
        order += 1
    if table_size(dim, order) != size:
        raise ParameterRangeError(f"{size} coefficients do not form a jet in {dim} variables")
    return order


def _free_letter(spec: str) -> str:
    for c in string.ascii_letters:
        if c not in spec:
            return c
    raise ParameterRangeError("contraction uses every available index letter")


def _constant_coeffs(value: np.ndarray, size: int) -> np.ndarray:
    coeffs = np.zeros(value.shape + (size,))
    coeffs[..., 0] = value
    return coeffs


class Jet:
    """Tensor-valued truncated Taylor expansion at a point."""

    __slots__ = ("dim", "order", "coeffs")
    __array_ufunc__ = None

    def __init__(self, coeffs, dim: int, *, check: bool = True):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 0:
            raise ParameterRangeError("jet coefficients need a coefficient axis")
        self.dim = dim
        self.order = order_for_size(dim, coeffs.shape[-1])
        if check and not np.isfinite(coeffs).all():
            raise JetDomainError("non-finite jet coefficient")
        self.coeffs = coeffs

    # construction

    @classmethod
    def constant(cls, value, dim: int, order: int) -> "Jet":
        return cls(_constant_coeffs(np.asarray(value, dtype=float), table_size(dim, order)), dim)

    @classmethod
    def zeros(cls, shape: tuple[int, ...], dim: int, order: int) -> "Jet":
        return cls(np.zeros(tuple(shape) + (table_size(dim, order),)), dim, check=False)

    @classmethod
    def variable(cls, i: int, value: float, dim: int, order: int) -> "Jet":
        """The coordinate function x_i (1-based) expanded at a point where it equals ``value``."""
        if not 1 <= i <= dim:
            raise ParameterRangeError(f"variable index {i} outside 1..{dim}")
        jet = cls.constant(value, dim, order)
        if order >= 1:
            unit = [0] * dim
            unit[i - 1] = 1
            jet.coeffs[get_table(dim, order).index[tuple(unit)]] = 1.0
        return jet

    # shape and access

    @property
    def table(self) -> MultiIndexTable:
        return get_table(self.dim, self.order)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return np.array(self.coeffs[..., 0])

    def __float__(self) -> float:
        if self.ndim:
            raise ParameterRangeError("only scalar jets convert to float")
        return float(self.coeffs[0])

    def __getitem__(self, key) -> "Jet":
        key = key if isinstance(key, tuple) else (key,)
        if len(key) > self.ndim:
            raise IndexError("too many component indices for jet")
        return Jet(self.coeffs[key], self.dim, check=False)

    def __repr__(self) -> str:
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape})"

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetOrderError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.coeffs[..., : table_size(self.dim, order)], self.dim, check=False)

    def partial(self, index: Sequence[int]) -> np.ndarray:
        """The derivative d^I f at the expansion point (I! times the stored coefficient)."""
        index = tuple(int(e) for e in index)
        if len(index) != self.dim or min(index) < 0:
            raise ParameterRangeError(f"multi-index {index} does not match {self.dim} variables")
        if sum(index) > self.order:
            raise JetOrderError(f"|I| = {sum(index)} exceeds jet order {self.order}")
        table = self.table
        position = table.index[index]
        return table.factorial[position] * self.coeffs[..., position]

    # arithmetic

    def _operands(self, other) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise ParameterRangeError(f"jets in {self.dim} and {other.dim} variables do not mix")
            size = min(self.coeffs.shape[-1], other.coeffs.shape[-1])
            return self.coeffs[..., :size], other.coeffs[..., :size]
        value = np.asarray(other, dtype=float)
        return self.coeffs, _constant_coeffs(value, self.coeffs.shape[-1])

    def __add__(self, other) -> "Jet":
        a, b = self._operands(other)
        return Jet(a + b, self.dim)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        a, b = self._operands(other)
        return Jet(a - b, self.dim)

    def __rsub__(self, other) -> "Jet":
        a, b = self._operands(other)
        return Jet(b - a, self.dim)

    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs, self.dim, check=False)

    def __pos__(self) -> "Jet":
        return self

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            value = np.asarray(other, dtype=float)
            return Jet(self.coeffs * value[..., None], self.dim)
        a, b = self._operands(other)
        table = get_table(self.dim, order_for_size(self.dim, a.shape[-1]))
        return Jet(table.multiply(a, b), self.dim)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            value = np.asarray(other, dtype=float)
            if np.any(value == 0):
                raise JetDomainError("division by zero")
            return Jet(self.coeffs / value[..., None], self.dim)
        result = self * other.reciprocal()
        a, b = self._operands(other)
        result.coeffs[..., 0] = a[..., 0] / b[..., 0]
        return result

    def __rtruediv__(self, other) -> "Jet":
        value = np.asarray(other, dtype=float)
        result = self.reciprocal() * value
        result.coeffs[..., 0] = value / self.coeffs[..., 0]
        return result

    def __pow__(self, exponent: int) -> "Jet":
        if isinstance(exponent, bool) or not isinstance(exponent, (int, np.integer)):
            raise ParameterRangeError("jets support integer powers only")
        exponent = int(exponent)
        base = self.reciprocal() if exponent < 0 else self
        remaining = abs(exponent)
        result = Jet.constant(np.ones(self.shape), self.dim, self.order)
        while remaining:
            if remaining & 1:
                result = result * base
            remaining >>= 1
            if remaining:
                base = base * base
        result.coeffs[..., 0] = self.coeffs[..., 0] ** exponent
        return result

    # unary functions

    def _compose(self, series: np.ndarray) -> "Jet":
        """Evaluate sum_m series[..., m] * (self - value)^m by Horner's rule."""
        if self.order == 0:
            return Jet(series[..., :1], self.dim)
        delta = self.coeffs.copy()
        delta[..., 0] = 0.0
        table = self.table
        acc = _constant_coeffs(series[..., self.order], table.size)
        for m in range(self.order - 1, -1, -1):
            acc = table.multiply(acc, delta)
            acc[..., 0] = series[..., m]
        return Jet(acc, self.dim)

    def _series_stack(self, terms: list[np.ndarray]) -> np.ndarray:
        return np.stack(terms, axis=-1)

    def reciprocal(self) -> "Jet":
        v = self.coeffs[..., 0]
        if np.any(v == 0):
            raise JetDomainError("division by a jet with zero value")
        terms = [1.0 / v]
        for _ in range(self.order):
            terms.append(-terms[-1] / v)
        return self._compose(self._series_stack(terms))

    def exp(self) -> "Jet":
        e = np.exp(self.coeffs[..., 0])
        terms = [e / math.factorial(m) for m in range(self.order + 1)]
        return self._compose(self._series_stack(terms))

    def log(self) -> "Jet":
        v = self.coeffs[..., 0]
        if np.any(v <= 0):
            raise JetDomainError("log of a non-positive value")
        terms = [np.log(v)]
        for m in range(1, self.order + 1):
            terms.append((-1.0) ** (m + 1) / (m * v**m))
        return self._compose(self._series_stack(terms))

    def sqrt(self) -> "Jet":
        v = self.coeffs[..., 0]
        if np.any(v <= 0):
            raise JetDomainError("sqrt of a non-positive value")
        terms = [np.sqrt(v)]
        for m in range(1, self.order + 1):
            terms.append(terms[-1] * (0.5 - (m - 1)) / (m * v))
        return self._compose(self._series_stack(terms))

    def sin(self) -> "Jet":
        v = self.coeffs[..., 0]
        cycle = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
        terms = [cycle[m % 4] / math.factorial(m) for m in range(self.order + 1)]
        return self._compose(self._series_stack(terms))

    def cos(self) -> "Jet":
        v = self.coeffs[..., 0]
        cycle = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
        terms = [cycle[m % 4] / math.factorial(m) for m in range(self.order + 1)]
        return self._compose(self._series_stack(terms))

    def tanh(self) -> "Jet":
        # y' = 1 - y^2 on the univariate series
        terms = [np.tanh(self.coeffs[..., 0])]
        for m in range(self.order):
            square = sum(terms[i] * terms[m - i] for i in range(m + 1))
            terms.append(((1.0 if m == 0 else 0.0) - square) / (m + 1))
        return self._compose(self._series_stack(terms))

    def atan(self) -> "Jet":
        # y' = 1/q with q(t) = (1 + v^2) + 2 v t + t^2
        v = self.coeffs[..., 0]
        q0, q1 = 1.0 + v * v, 2.0 * v
        inverse = [1.0 / q0]
        for m in range(1, self.order):
            prev2 = inverse[m - 2] if m >= 2 else 0.0
            inverse.append(-(q1 * inverse[m - 1] + prev2) / q0)
        terms = [np.arctan(v)] + [inverse[m] / (m + 1) for m in range(self.order)]
        return self._compose(self._series_stack(terms))

    # calculus

    def diff(self, var: int) -> "Jet":
        """Partial derivative in variable ``var`` (0-based); lowers the order by one."""
        if not 0 <= var < self.dim:
            raise ParameterRangeError(f"variable {var} outside 0..{self.dim - 1}")
        if self.order == 0:
            raise JetOrderError("cannot differentiate an order-0 jet")
        source, factor = self.table.derivative_map(var)
        return Jet(self.coeffs[..., source] * factor, self.dim, check=False)

    def grad(self) -> "Jet":
        """All first partials, appended as the last component axis."""
        parts = [self.diff(v).coeffs for v in range(self.dim)]
        return Jet(np.stack(parts, axis=-2), self.dim, check=False)

    # linear component operations

    def einsum(self, spec: str) -> "Jet":
        """Linear rearrangement of component axes, e.g. ``"ijk->kij"`` or ``"ii->"``."""
        inputs, output = spec.split("->")
        return Jet(np.einsum(f"{inputs}...->{output}...", self.coeffs), self.dim, check=False)

    def sum(self, axes: Sequence[int] | None = None) -> "Jet":
        axes = tuple(range(self.ndim)) if axes is None else tuple(axes)
        return Jet(self.coeffs.sum(axis=axes), self.dim, check=False)

    @property
    def T(self) -> "Jet":
        return self.einsum("ab->ba")

    def symmetrize(self) -> "Jet":
        return (self + self.T) * 0.5


def jet_variable(i: int, value: float, dim: int, order: int) -> Jet:
    return Jet.variable(i, value, dim, order)


def partial(jet: Jet, index: Sequence[int]) -> np.ndarray:
    return jet.partial(index)


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    """Stack jets of equal shape along a new component axis."""
    if not jets:
        raise ParameterRangeError("nothing to stack")
    size = min(j.coeffs.shape[-1] for j in jets)
    return Jet(np.stack([j.coeffs[..., :size] for j in jets], axis=axis), jets[0].dim, check=False)


def contract(spec: str, *operands) -> Jet:
    """Einsum-style contraction over component indices with jet multiplication.

    Operands are jets or constant arrays; they are multiplied pairwise from the left.
    """
    spec = spec.replace(" ", "")
    inputs, output = spec.split("->")
    subscripts = inputs.split(",")
    if len(subscripts) != len(operands):
        raise ParameterRangeError(f"{spec!r} expects {len(subscripts)} operands, got {len(operands)}")
    jets = [op for op in operands if isinstance(op, Jet)]
    if not jets:
        raise ParameterRangeError("contraction needs at least one jet operand")
    dim = jets[0].dim
    size = min(j.coeffs.shape[-1] for j in jets)
    order = order_for_size(dim, size)
    arrays = []
    for op in operands:
        if isinstance(op, Jet):
            if op.dim != dim:
                raise ParameterRangeError("contraction mixes jets in different variables")
            arrays.append(op.coeffs[..., :size])
        else:
            arrays.append(_constant_coeffs(np.asarray(op, dtype=float), size))
    table = get_table(dim, order)
    subs = list(subscripts)
    while len(arrays) > 1:
        a, b = arrays.pop(0), arrays.pop(0)
        sa, sb = subs.pop(0), subs.pop(0)
        keep = set(output).union(*subs) if subs else set(output)
        sc = "".join(c for c in dict.fromkeys(sa + sb) if c in keep)
        arrays.insert(0, table.contract(f"{sa},{sb}->{sc}", a, b))
        subs.insert(0, sc)
    result = arrays[0]
    if subs[0] != output:
        result = np.einsum(f"{subs[0]}...->{output}...", result)
    return Jet(result, dim)


def inverse(matrix: Jet, *, error=SingularMetricError, tolerance: float = 1e-12) -> Jet:
    """Inverse of a jet-valued square matrix.

    The value layer is factorized with partial pivoting; higher layers follow from the
    Neumann series of (M0 + dM)^-1, which terminates at the jet order.
    """
    m0 = matrix.value
    try:
        lu_scale = np.abs(m0).max()
        inv0 = np.linalg.inv(m0)
    except np.linalg.LinAlgError as exc:
        raise error(f"singular matrix at the expansion point: {exc}") from exc
    if lu_scale == 0 or not np.isfinite(inv0).all() or np.abs(inv0).max() * lu_scale * tolerance > 1:
        raise error("matrix is numerically singular at the expansion point")
    delta = matrix - m0
    step = contract("ij,jk->ik", -inv0, delta)
    term = Jet.constant(inv0, matrix.dim, matrix.order)
    result = term
    for _ in range(matrix.order):
        term = contract("ij,jk->ik", step, term)
        result = result + term
    return result


class Restriction:
    """Pull-back of jets in ambient variables along a map given as jets in fewer variables.

    ``inner`` is a vector jet z(x); a field expanded at z(x0) becomes a jet in x at x0.
    """

    def __init__(self, inner: Jet):
        if inner.ndim != 1:
            raise ParameterRangeError("restriction needs a vector of inner jets")
        self.outer_dim = inner.shape[0]
        self.inner_dim = inner.dim
        self.order = inner.order
        self.point = inner.value
        outer = get_table(self.outer_dim, self.order)
        inner_table = inner.table
        delta = inner.coeffs.copy()
        delta[:, 0] = 0.0
        matrix = np.zeros((outer.size, inner_table.size))
        matrix[0, 0] = 1.0
        for idx in range(1, outer.size):
            row = [int(e) for e in outer.monomials[idx]]
            var = next(v for v, e in enumerate(row) if e)
            row[var] -= 1
            matrix[idx] = inner_table.multiply(matrix[outer.index[tuple(row)]], delta[var])
        self.matrix = matrix

    def __call__(self, field: Jet) -> Jet:
        if field.dim != self.outer_dim:
            raise ParameterRangeError(f"field in {field.dim} variables, restriction expects {self.outer_dim}")
        order = min(field.order, self.order)
        rows = table_size(self.outer_dim, order)
        cols = table_size(self.inner_dim, order)
        return Jet(field.coeffs[..., :rows] @ self.matrix[:rows, :cols], self.inner_dim)
