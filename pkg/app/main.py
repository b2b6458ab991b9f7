import logging
from contextlib import asynccontextmanager
from datetime import datetime

import uvicorn
from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.api.endpoints import commands, health
from app.api.middleware.logging import request_logger
from app.config import settings
from gjms.errors import GJMSError
from gjms.registry import BUILTIN_GEOMETRIES

logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO))
logger = logging.getLogger(__name__)

# CLI exit code -> HTTP status
ERROR_STATUS = {
    3: status.HTTP_422_UNPROCESSABLE_ENTITY,
    4: status.HTTP_400_BAD_REQUEST,
    5: status.HTTP_422_UNPROCESSABLE_ENTITY,
}

ROUTES = {
    "health": "/api/v1/health",
    "geometries": "/api/v1/geometries",
    "run": "/api/v1/run",
}


def _error_response(status_code: int, body: dict) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={**body, "timestamp": datetime.utcnow().isoformat()})


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(
        f"Starting {settings.service_name} {settings.version} "
        f"(jet order {settings.jet_order}, tolerance {settings.tolerance:g}, debug {settings.debug})"
    )
    logger.info(f"{len(BUILTIN_GEOMETRIES)} built-in geometries: {', '.join(BUILTIN_GEOMETRIES)}")
    yield
    logger.info(f"Shutting down {settings.service_name}...")


app = FastAPI(
    title=settings.service_name,
    description="Pointwise evaluation and verification of extrinsic GJMS operators of submanifolds",
    version=settings.version,
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"] if settings.debug else [],
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


@app.middleware("http")
async def log_requests(request: Request, call_next):
    return await request_logger.log_request_response(request, call_next)


@app.exception_handler(GJMSError)
async def gjms_exception_handler(request: Request, exc: GJMSError):
    logger.warning(f"{request.url.path} failed with {exc.kind}: {exc.message}")
    return _error_response(ERROR_STATUS.get(exc.exit_code, status.HTTP_400_BAD_REQUEST), exc.to_dict())


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Unhandled exception on {request.url.path}: {exc}", exc_info=True)
    return _error_response(
        status.HTTP_500_INTERNAL_SERVER_ERROR,
        {
            "error": "Internal server error",
            "message": "An unexpected error occurred. Please try again later.",
        },
    )


app.include_router(health.router, prefix="/api/v1", tags=["Health"])
app.include_router(commands.router, prefix="/api/v1", tags=["Commands"])


@app.get("/")
async def root():
    """
    Root endpoint with service information.
    """
    return {
        "service": settings.service_name,
        "version": settings.version,
        "description": "Extrinsic GJMS operators and Q-curvatures of submanifolds",
        "endpoints": ROUTES,
        "timestamp": datetime.utcnow().isoformat(),
    }


if __name__ == "__main__":
    uvicorn.run(
        "app.main:app",
        host=settings.host,
        port=settings.port,
        reload=settings.debug,
        log_level=settings.log_level.lower(),
    )
