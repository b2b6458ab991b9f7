import itertools
import json
import logging
import time
from datetime import datetime
from typing import Any, Dict, Optional

from fastapi import Request, Response

from gjms.errors import GJMSError
from gjms.reports import Report

logger = logging.getLogger("gjms.requests")
events_logger = logging.getLogger("gjms.events")

_request_ids = itertools.count(1)


class RequestLoggingMiddleware:
    """Logs one JSON line per request, with the command and geometry of run requests."""

    async def log_request_response(self, request: Request, call_next) -> Response:
        started = time.perf_counter()
        entry = await self._describe(request)

        response = await call_next(request)

        elapsed = time.perf_counter() - started
        entry.update(status_code=response.status_code, process_time_seconds=round(elapsed, 4))
        log = logger.warning if response.status_code >= 400 else logger.info
        log(json.dumps(entry, default=str))

        response.headers["X-Process-Time"] = f"{elapsed:.6f}"
        response.headers["X-Request-ID"] = entry["request_id"]
        return response

    async def _describe(self, request: Request) -> Dict[str, Any]:
        entry: Dict[str, Any] = {
            "request_id": f"req_{int(time.time())}_{next(_request_ids):06d}",
            "timestamp": datetime.utcnow().isoformat(),
            "method": request.method,
            "path": request.url.path,
            "client_ip": request.client.host if request.client else "unknown",
        }
        if request.method == "POST":
            body = await self._json_body(request)
            if body:
                entry["command"] = body.get("command")
                geometry = body.get("geometry")
                # inline documents are logged by name only
                entry["geometry"] = geometry.get("name", "custom") if isinstance(geometry, dict) else geometry
        return entry

    @staticmethod
    async def _json_body(request: Request) -> Optional[Dict[str, Any]]:
        raw = await request.body()
        if not raw:
            return None
        try:
            data = json.loads(raw)
        except ValueError:
            return None
        return data if isinstance(data, dict) else None


class VerificationEventLogger:
    """Structured events of verification runs."""

    @staticmethod
    def log_event(event_type: str, details: Dict[str, Any], severity: str = "INFO"):
        payload = {"event": event_type, "at": datetime.utcnow().isoformat(), "severity": severity, **details}
        events_logger.log(getattr(logging, severity, logging.INFO), json.dumps(payload, default=str))

    @staticmethod
    def log_command_started(command: str, geometry: Optional[str], target: Optional[str] = None):
        VerificationEventLogger.log_event(
            "command_started",
            {"command": command, "geometry": geometry, "target": target},
        )

    @staticmethod
    def log_report(report: Report):
        """One event per run; failing runs name the residuals above tolerance."""
        if report.passed:
            VerificationEventLogger.log_event(
                "command_passed",
                {"command": report.command, "geometry": report.geometry, "max_residual": report.max_residual()},
            )
            return
        failures = [
            {"x": point.x, "label": point.label, "residual": name, "value": value}
            for point in report.points
            for name, value in point.residuals.items()
            if not value <= report.tol
        ]
        VerificationEventLogger.log_event(
            "residual_above_tolerance",
            {"command": report.command, "geometry": report.geometry, "tol": report.tol, "failures": failures},
            "WARNING",
        )

    @staticmethod
    def log_error(command: str, error: GJMSError):
        severity = "ERROR" if error.exit_code == 5 else "WARNING"
        VerificationEventLogger.log_event(error.kind, {"command": command, "message": error.message}, severity)


# Middleware instance
request_logger = RequestLoggingMiddleware()
event_logger = VerificationEventLogger()
