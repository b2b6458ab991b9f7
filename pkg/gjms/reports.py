"""
Verification reports and their JSON / CSV renderings.

Floats are written with 17 significant digits so reports round-trip doubles
exactly. ``timing`` is the only field that varies between identical runs.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field


class PointRecord(BaseModel):
    x: list[float] = Field(default_factory=list)
    label: Optional[str] = None
    values: dict[str, float] = Field(default_factory=dict)
    residuals: dict[str, float] = Field(default_factory=dict)

    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)


class Report(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    command: str
    geometry: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    points: list[PointRecord] = Field(default_factory=list)
    passed: bool = Field(default=True, alias="pass")
    tol: float = 1e-6
    reference: Optional[str] = Field(default=None, alias="paper_ref")
    identity: Optional[str] = None
    timing: dict[str, Any] = Field(default_factory=dict)

    def max_residual(self) -> float:
        return max((p.worst() for p in self.points), default=0.0)

    def evaluate(self) -> "Report":
        """Set ``passed`` from the residuals against ``tol``."""
        self.passed = all(math.isfinite(r) and r <= self.tol for p in self.points for r in p.residuals.values())
        return self

    def payload(self, timing: bool = True) -> dict:
        data = self.model_dump(by_alias=True)
        if not timing:
            data.pop("timing", None)
        return data

    def to_json(self, timing: bool = True) -> str:
        return dumps(self.payload(timing)) + "\n"

    def to_csv(self) -> str:
        return render_csv(self)

    def write(self, path: Path, fmt: str = "json") -> None:
        text = self.to_csv() if fmt == "csv" else self.to_json()
        Path(path).write_text(text, encoding="utf-8")


def _number(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    text = format(value, ".17g")
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def dumps(value: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with full-precision floats."""
    pad = " " * (indent * (_level + 1))
    close = " " * (indent * _level)
    if isinstance(value, bool) or value is None:
        return "true" if value is True else "false" if value is False else "null"
    if isinstance(value, float):
        return _number(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return "[" + ", ".join(dumps(v) for v in value) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    if hasattr(value, "item"):
        return dumps(value.item(), indent, _level)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def render_csv(report: Report) -> str:
    """One row per point: coordinates, then values, then residuals."""
    width = max((len(p.x) for p in report.points), default=0)
    value_keys = sorted({key for p in report.points for key in p.values})
    residual_keys = sorted({key for p in report.points for key in p.residuals})
    header = (
        ["label"]
        + [f"x{i + 1}" for i in range(width)]
        + value_keys
        + [f"residual:{key}" for key in residual_keys]
    )
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for point in report.points:
        row = [point.label or ""]
        row += [_number(v) for v in point.x] + [""] * (width - len(point.x))
        row += [_number(point.values[key]) if key in point.values else "" for key in value_keys]
        row += [_number(point.residuals[key]) if key in point.residuals else "" for key in residual_keys]
        writer.writerow(row)
    return buffer.getvalue()
