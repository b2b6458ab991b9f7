"""
Exception hierarchy shared by the library, the CLI and the HTTP service.

Every error carries the process exit code the CLI reports for it:

- 3: inadmissible parameters (dimension/order combinations, jet depth)
- 4: parse or geometry-specification errors
- 5: numeric singularities (domain violations, singular metrics, degenerate embeddings)
"""

from typing import Optional


class GJMSError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": self.message, "exit_code": self.exit_code}


class ExpressionSyntaxError(GJMSError):
    """Malformed expression text."""

    exit_code = 4
    kind = "parse_error"

    def __init__(self, message: str, line: int = 1, column: int = 1, token: Optional[str] = None):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column
        self.token = token

    def to_dict(self) -> dict:
        data = super().to_dict()
        data.update({"line": self.line, "column": self.column, "token": self.token})
        return data


class GeometrySpecError(GJMSError):
    """Invalid geometry definition (schema, dimensions, identifiers)."""

    exit_code = 4
    kind = "spec_error"


class InadmissibleError(GJMSError):
    """The requested (k, n, l) combination has no operator."""

    exit_code = 3
    kind = "inadmissible"


class ParameterRangeError(InadmissibleError):
    kind = "parameter_range"


class JetOrderError(InadmissibleError):
    """Jet order too small for the derivative depth of an operation."""

    kind = "jet_order"


class NumericSingularityError(GJMSError):
    exit_code = 5
    kind = "numeric_singularity"


class JetDomainError(NumericSingularityError):
    """Division by zero, log/sqrt of a non-positive value, or a non-finite coefficient."""

    kind = "jet_domain"


class SingularMetricError(NumericSingularityError):
    kind = "singular_metric"


class DegenerateEmbeddingError(NumericSingularityError):
    kind = "degenerate_embedding"
