"""
Geometry definitions: the JSON file schema, the built-in geometries and the
seeded perturbed-flat family.

A geometry is an ambient metric chart on R^n, an embedding of a k-dimensional
chart into it, an optional Einstein constant tag, an optional conformal factor
and a sampling box on the submanifold chart.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from gjms.errors import ExpressionSyntaxError, GeometrySpecError
from gjms.geometry import MetricChart
from gjms.jets import ExprNode, as_expression
from gjms.submanifold import Embedding

logger = logging.getLogger(__name__)

Entry = Union[str, float, None]

STEREOGRAPHIC = "4/(1+{squares})^2"


class GeometryFile(BaseModel):
    """On-disk form of a geometry."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    name: Optional[str] = None
    n: int = Field(ge=2)
    metric: list[list[Entry]]
    k: int = Field(ge=1)
    embedding: Optional[list[Union[str, float]]] = None
    graph: Optional[list[Union[str, float]]] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    omega: Optional[str] = None
    box: Optional[list[tuple[float, float]]] = None
    tags: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_dimensions(self) -> "GeometryFile":
        if self.k >= self.n:
            raise ValueError(f"k={self.k} must be below n={self.n}")
        if len(self.metric) != self.n:
            raise ValueError(f"metric has {len(self.metric)} rows, expected {self.n}")
        if (self.embedding is None) == (self.graph is None):
            raise ValueError("exactly one of 'embedding' and 'graph' is required")
        if self.embedding is not None and len(self.embedding) != self.n:
            raise ValueError(f"embedding has {len(self.embedding)} components, expected {self.n}")
        if self.graph is not None and len(self.graph) != self.n - self.k:
            raise ValueError(f"graph has {len(self.graph)} components, expected {self.n - self.k}")
        if self.box is not None:
            if len(self.box) != self.k:
                raise ValueError(f"box has {len(self.box)} intervals, expected {self.k}")
            if any(lo >= hi for lo, hi in self.box):
                raise ValueError("box intervals must satisfy lo < hi")
        return self


@dataclass(frozen=True)
class GeometrySpec:
    name: str
    metric: MetricChart
    embedding: Embedding
    lam: Optional[float] = None
    omega: Optional[ExprNode] = None
    box: tuple[tuple[float, float], ...] = ()
    tags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.metric.n != self.embedding.n:
            raise GeometrySpecError(f"metric has n={self.metric.n} but embedding targets n={self.embedding.n}")
        if not self.box:
            object.__setattr__(self, "box", tuple((-0.5, 0.5) for _ in range(self.k)))
        if len(self.box) != self.k:
            raise GeometrySpecError(f"box has {len(self.box)} intervals, expected {self.k}")

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def k(self) -> int:
        return self.embedding.k

    @property
    def einstein(self) -> bool:
        return self.lam is not None

    @property
    def minimal(self) -> bool:
        return "minimal" in self.tags

    def sample_points(self, count: int, seed: int = 0) -> list[np.ndarray]:
        """Seeded uniform points in the chart box."""
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return [lo + (hi - lo) * rng.random(self.k) for _ in range(count)]

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "k": self.k,
            "lambda": self.lam,
            "tags": sorted(self.tags),
        }


def _graph_aliases(n: int, k: int) -> dict[str, int]:
    return {f"u{i + 1}": k + i for i in range(n - k)}


def _build(
    name: str,
    n: int,
    k: int,
    metric: Sequence[Sequence[Entry]],
    *,
    embedding: Optional[Sequence] = None,
    graph: Optional[Sequence] = None,
    lam: Optional[float] = None,
    omega: Optional[str] = None,
    box: Optional[Sequence[Sequence[float]]] = None,
    tags: Sequence[str] = (),
) -> GeometrySpec:
    chart = MetricChart.from_rows(metric, _graph_aliases(n, k))
    if chart.n != n:
        raise GeometrySpecError(f"metric is {chart.n}x{chart.n}, expected n={n}")
    if graph is not None:
        surface = Embedding.from_graph(k, graph)
    else:
        surface = Embedding.from_expressions(k, embedding)
    return GeometrySpec(
        name=name,
        metric=chart,
        embedding=surface,
        lam=lam,
        omega=None if omega is None else as_expression(omega),
        box=tuple(tuple(float(v) for v in pair) for pair in box) if box else (),
        tags=frozenset(tags),
    )


def _diagonal(n: int, entry: str) -> list[list[Entry]]:
    return [[entry if i == j else "0" for j in range(n)] for i in range(n)]


def _stereographic(n: int) -> list[list[Entry]]:
    squares = "+".join(f"x{i + 1}^2" for i in range(n))
    return _diagonal(n, STEREOGRAPHIC.format(squares=squares))


def _cube(k: int, half: float) -> list[tuple[float, float]]:
    return [(-half, half) for _ in range(k)]


def _flat_slice(n: int, k: int) -> list[str]:
    return [f"x{i + 1}" for i in range(k)] + ["0"] * (n - k)


# --- Built-ins ---

BUILTIN_GEOMETRIES: dict[str, Callable[[], GeometrySpec]] = {}


def builtin(name: str):
    def register(factory: Callable[[], GeometrySpec]) -> Callable[[], GeometrySpec]:
        BUILTIN_GEOMETRIES[name] = lru_cache(maxsize=None)(factory)
        return factory

    return register


@builtin("euclidean3")
def _euclidean3() -> GeometrySpec:
    return _build(
        "euclidean3", 3, 2, _diagonal(3, "1"),
        embedding=_flat_slice(3, 2), lam=0.0, box=_cube(2, 1.0),
        tags=("minimal", "totally-geodesic", "conformally-flat"),
    )


@builtin("sphere3")
def _sphere3() -> GeometrySpec:
    # generic surface in the stereographic chart of the unit 3-sphere
    return _build(
        "sphere3", 3, 2, _stereographic(3),
        graph=["0.3*x1^2 - 0.2*x2^2 + 0.1*x1*x2 + 0.05*x1^3"], lam=1.0, box=_cube(2, 0.45),
        tags=("conformally-flat",),
    )


@builtin("sphere5")
def _sphere5() -> GeometrySpec:
    return _build(
        "sphere5", 5, 3, _stereographic(5),
        graph=["0.2*x1^2 + 0.1*x2*x3 - 0.05*x3^3", "0.15*x3^2 - 0.1*x1*x2 + 0.04*x1^2*x2"],
        lam=1.0, box=_cube(3, 0.35),
        tags=("conformally-flat",),
    )


@builtin("equator-s2-in-s3")
def _equator_s2() -> GeometrySpec:
    return _build(
        "equator-s2-in-s3", 3, 2, _stereographic(3),
        embedding=_flat_slice(3, 2), lam=1.0, box=_cube(2, 0.45),
        tags=("minimal", "totally-geodesic", "conformally-flat"),
    )


@builtin("equator-s4-in-s5")
def _equator_s4() -> GeometrySpec:
    return _build(
        "equator-s4-in-s5", 5, 4, _stereographic(5),
        embedding=_flat_slice(5, 4), lam=1.0, box=_cube(4, 0.35),
        tags=("minimal", "totally-geodesic", "conformally-flat"),
    )


@builtin("great-circle-s1-in-s3")
def _great_circle() -> GeometrySpec:
    return _build(
        "great-circle-s1-in-s3", 3, 1, _stereographic(3),
        embedding=_flat_slice(3, 1), lam=1.0, box=_cube(1, 0.45),
        tags=("minimal", "totally-geodesic", "conformally-flat"),
    )


@builtin("clifford-torus")
def _clifford_torus() -> GeometrySpec:
    # round S^3 as dz^2 + sin^2(z + pi/4) dx1^2 + cos^2(z + pi/4) dx2^2; the torus sits at z = 0
    metric = [
        ["sin(x3 + pi/4)^2", "0", "0"],
        ["cos(x3 + pi/4)^2", "0"],
        ["1"],
    ]
    return _build(
        "clifford-torus", 3, 2, metric,
        embedding=_flat_slice(3, 2), lam=1.0, box=_cube(2, 0.5),
        tags=("minimal", "conformally-flat"),
    )


@builtin("small-sphere-umbilic")
def _small_sphere() -> GeometrySpec:
    # latitude 3-sphere of the equatorial S^4 = {x5 = 0} in the stereographic chart of S^5
    return _build(
        "small-sphere-umbilic", 5, 3, _stereographic(5),
        embedding=["x1", "x2", "x3", "sqrt(0.25 - x1^2 - x2^2 - x3^2)", "0"],
        lam=1.0, box=_cube(3, 0.2),
        tags=("umbilic", "conformally-flat"),
    )


def _monomials(variables: Sequence[str], degree: int) -> list[str]:
    if degree == 0:
        return [""]
    result = []
    for i, name in enumerate(variables):
        for tail in _monomials(variables[i:], degree - 1):
            result.append(name if not tail else f"{name}*{tail}")
    return result


def random_polynomial(
    rng: np.random.Generator,
    variables: Sequence[str],
    degrees: Sequence[int],
    amplitude: float,
) -> str:
    """Expression text of a polynomial with seeded uniform coefficients."""
    terms = []
    for degree in degrees:
        for monomial in _monomials(variables, degree):
            c = float(rng.uniform(-amplitude, amplitude))
            body = f"{abs(c)!r}*{monomial}" if monomial else f"{abs(c)!r}"
            terms.append(("- " if c < 0 else "+ ") + body)
    if not terms:
        return "0"
    text = " ".join(terms)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


def random_perturbed_geometry(
    seed: int = 0,
    k: int = 3,
    n: int = 5,
    amplitude: float = 0.05,
    conformally_flat: bool = False,
) -> GeometrySpec:
    """Flat space bent by e^{2w}(delta + s) with a cubic w and quadratic s; Sigma a cubic graph."""
    rng = np.random.default_rng(seed)
    variables = [f"x{i + 1}" for i in range(n)]
    omega = random_polynomial(rng, variables, (1, 2, 3), amplitude)
    factor = f"exp(2*({omega}))"
    rows: list[list[Entry]] = []
    for i in range(n):
        row: list[Entry] = []
        for j in range(i, n):
            if conformally_flat:
                s = "0"
            else:
                s = random_polynomial(rng, variables, (2,), amplitude)
            base = "1 + " if i == j else ""
            if i != j and conformally_flat:
                row.append("0")
            else:
                row.append(f"{factor}*({base}{s})")
        rows.append(row)
    graph = [random_polynomial(rng, variables[:k], (2, 3), 4 * amplitude) for _ in range(n - k)]
    tags = ("conformally-flat",) if conformally_flat else ()
    return _build(
        f"perturbed-random-{seed}", n, k, rows,
        graph=graph, box=_cube(k, 0.3), tags=tags,
    )


# --- Parsing and resolution ---


def parse_geometry(document: Union[bytes, str], name: Optional[str] = None) -> GeometrySpec:
    """Validate a JSON geometry document."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as e:
            raise GeometrySpecError(f"geometry file is not UTF-8: {e}") from e
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as e:
        raise ExpressionSyntaxError(f"invalid JSON: {e.msg}", e.lineno, e.colno) from e
    try:
        spec = GeometryFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "document"
        raise GeometrySpecError(f"{where}: {first['msg']}") from e

    try:
        return _build(
            spec.name or name or "custom", spec.n, spec.k, spec.metric,
            embedding=spec.embedding, graph=spec.graph, lam=spec.lam,
            omega=spec.omega, box=spec.box, tags=spec.tags,
        )
    except ExpressionSyntaxError as e:
        logger.debug("expression error in geometry %s: %s", name, e)
        raise


def list_geometries() -> list[dict]:
    entries = [factory().describe() for factory in BUILTIN_GEOMETRIES.values()]
    entries.append({"name": "perturbed-random", "n": 5, "k": 3, "lambda": None, "tags": ["seeded"]})
    return entries


def resolve_geometry(ref: str, seed: int = 0) -> GeometrySpec:
    """A built-in name, ``perturbed-random`` or a path to a JSON geometry file."""
    if ref in BUILTIN_GEOMETRIES:
        return BUILTIN_GEOMETRIES[ref]()
    if ref == "perturbed-random":
        return random_perturbed_geometry(seed)
    path = Path(ref)
    if path.is_file():
        return parse_geometry(path.read_bytes(), name=path.stem)
    raise GeometrySpecError(f"unknown geometry {ref!r}: not a built-in name or a readable file")
