"""
Extrinsic GJMS operators of submanifolds, evaluated pointwise from truncated
Taylor jets of the ambient metric and the embedding.
"""

from gjms.einstein import (
    FactorizationSpec,
    c_coefficients,
    canonical_family_coefficients,
    factorized_apply,
    q_closed_form,
    sphere_eigenvalue,
)
from gjms.errors import GJMSError
from gjms.geometry import MetricChart, curvature_pack
from gjms.normalform import general_operator_coefficients, pipeline_apply_p4
from gjms.operators import (
    admissible,
    apply_p2,
    apply_p4,
    extrinsic_coefficients,
    intrinsic_coefficients,
    tilde_coefficients,
)
from gjms.registry import GeometrySpec, parse_geometry, resolve_geometry
from gjms.reports import Report
from gjms.runner import RunOptions, VerificationRunner, run_command
from gjms.submanifold import Embedding, InducedChart, extrinsic_pack, fialkow_pack

__version__ = "0.1.0"

__all__ = [
    "Embedding",
    "FactorizationSpec",
    "GJMSError",
    "GeometrySpec",
    "InducedChart",
    "MetricChart",
    "Report",
    "RunOptions",
    "VerificationRunner",
    "admissible",
    "apply_p2",
    "apply_p4",
    "c_coefficients",
    "canonical_family_coefficients",
    "curvature_pack",
    "extrinsic_coefficients",
    "extrinsic_pack",
    "factorized_apply",
    "fialkow_pack",
    "general_operator_coefficients",
    "intrinsic_coefficients",
    "parse_geometry",
    "pipeline_apply_p4",
    "q_closed_form",
    "resolve_geometry",
    "run_command",
    "sphere_eigenvalue",
    "tilde_coefficients",
]
