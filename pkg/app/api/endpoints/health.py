import datetime
from typing import Callable

from fastapi import APIRouter, Response, status

from app.config import settings
from gjms.einstein import q_closed_form
from gjms.registry import BUILTIN_GEOMETRIES

router = APIRouter()


def _now() -> str:
    return datetime.datetime.utcnow().isoformat()


def _engine_check() -> dict:
    # Q4 of a minimal S^4 in an Einstein space with lambda = 1 is 3! = 6.
    value = q_closed_form(4, 2)
    ok = value == 6
    return {
        "status": "healthy" if ok else "unhealthy",
        "message": f"critical Q4 of the round 4-sphere evaluates to {value}",
    }


def _registry_check() -> dict:
    spec = BUILTIN_GEOMETRIES["euclidean3"]()
    return {
        "status": "healthy",
        "message": f"{len(BUILTIN_GEOMETRIES)} built-in geometries registered, {spec.name} builds",
    }


CHECKS: dict[str, Callable[[], dict]] = {
    "engine": _engine_check,
    "geometries": _registry_check,
}


def _run_checks() -> dict:
    results = {}
    for name, check in CHECKS.items():
        try:
            results[name] = check()
        except Exception as e:
            results[name] = {"status": "unhealthy", "message": f"{name} check failed: {e}"}
    return results


@router.get("/health")
async def health_check():
    """
    Basic health check endpoint.
    """
    return {
        "status": "healthy",
        "timestamp": _now(),
        "service": settings.service_name,
        "version": settings.version,
    }


@router.get("/health/detailed")
async def detailed_health_check():
    """
    Health check with an engine smoke test and the active numeric settings.
    """
    checks = _run_checks()
    checks["settings"] = {
        "status": "healthy",
        "message": f"jet order {settings.jet_order}, tolerance {settings.tolerance:g}",
    }
    degraded = any(check["status"] != "healthy" for check in checks.values())
    return {
        "status": "degraded" if degraded else "healthy",
        "timestamp": _now(),
        "service": settings.service_name,
        "version": settings.version,
        "checks": checks,
    }


@router.get("/health/ready")
async def readiness_check(response: Response):
    """
    Readiness check: 503 until the engine and registry checks pass.
    """
    checks = _run_checks()
    ready = all(check["status"] == "healthy" for check in checks.values())
    if not ready:
        response.status_code = status.HTTP_503_SERVICE_UNAVAILABLE
    return {"status": "ready" if ready else "not ready", "timestamp": _now()}


@router.get("/health/live")
async def liveness_check():
    return {"status": "alive", "timestamp": _now()}
