import json
from typing import Any, Dict, Optional, Union

from fastapi import APIRouter
from pydantic import BaseModel, Field, field_validator

from app.api.middleware.logging import event_logger
from app.config import settings
from gjms.errors import GeometrySpecError, GJMSError
from gjms.registry import BUILTIN_GEOMETRIES, list_geometries, parse_geometry, resolve_geometry
from gjms.runner import COMMANDS, VERIFY_TARGETS, RunOptions, get_runner

router = APIRouter()


class RunOptionsModel(BaseModel):
    tol: Optional[float] = Field(default=None, gt=0)
    seed: Optional[int] = None
    points: Optional[int] = Field(default=None, ge=1, le=100)
    order: Optional[int] = Field(default=None, ge=2, le=10)
    level: Optional[int] = Field(default=None, ge=1, le=3)
    f: Optional[str] = None
    trials: Optional[int] = Field(default=None, ge=1, le=20)
    k: Optional[int] = Field(default=None, ge=1)
    l: Optional[int] = Field(default=None, ge=1)
    mmax: Optional[int] = Field(default=None, ge=0, le=50)
    lam: Optional[float] = None


class RunRequest(BaseModel):
    command: str
    geometry: Optional[Union[str, Dict[str, Any]]] = None
    target: Optional[str] = None
    options: RunOptionsModel = Field(default_factory=RunOptionsModel)

    @field_validator("command")
    @classmethod
    def validate_command(cls, v):
        if v not in COMMANDS:
            raise ValueError(f"command must be one of {', '.join(COMMANDS)}")
        return v

    @field_validator("target")
    @classmethod
    def validate_target(cls, v):
        if v is not None and v not in VERIFY_TARGETS:
            raise ValueError(f"target must be one of {', '.join(VERIFY_TARGETS)}")
        return v


def _geometry(request: RunRequest, seed: int):
    if request.geometry is None:
        return None
    if isinstance(request.geometry, dict):
        return parse_geometry(json.dumps(request.geometry))
    if request.geometry not in BUILTIN_GEOMETRIES and request.geometry != "perturbed-random":
        raise GeometrySpecError(f"unknown geometry {request.geometry!r}; inline definitions go in the request body")
    return resolve_geometry(request.geometry, seed)


@router.get("/geometries")
async def geometries():
    """
    Built-in geometries with their dimensions and Einstein constants.
    """
    return {"geometries": list_geometries()}


@router.post("/run")
def run(request: RunRequest):
    """
    Run a command or verify target and return its report.
    """
    options = RunOptions.from_settings(settings, target=request.target, **request.options.model_dump())
    geometry_name = request.geometry if isinstance(request.geometry, str) else "inline"
    event_logger.log_command_started(request.command, geometry_name, request.target)
    try:
        spec = _geometry(request, options.seed)
        report = get_runner(settings).run(request.command, spec, options)
    except GJMSError as e:
        event_logger.log_error(request.command, e)
        raise
    event_logger.log_report(report)
    return report.payload()
