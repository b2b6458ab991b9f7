"""
Setup script for the GJMS verification service.
Run this script to validate the sample geometries and smoke-test the engine.
"""

from pathlib import Path

from app.config import settings
from gjms.errors import GJMSError
from gjms.registry import BUILTIN_GEOMETRIES, resolve_geometry
from gjms.runner import RunOptions, run_command

SAMPLES = Path(__file__).parent / "samples"


def check_samples():
    """Parse every sample geometry file."""
    for path in sorted(SAMPLES.glob("*.json")):
        try:
            spec = resolve_geometry(str(path))
            print(f"Parsed {path.name}: {spec.name} (n={spec.n}, k={spec.k})")
        except GJMSError as e:
            print(f"Error in {path.name}: {e.message}")


def smoke_test():
    """Q2 of the equatorial 2-sphere must be 1."""
    options = RunOptions(level=1, order=3, points=2, tol=settings.tolerance)
    report = run_command("qcurv", "equator-s2-in-s3", options)
    status = "passed" if report.passed else "FAILED"
    print(f"qcurv on equator-s2-in-s3 {status} (max residual {report.max_residual():.2e})")
    return report.passed


def main():
    print("Setting up the GJMS verification service...")

    print(f"Built-in geometries: {', '.join(BUILTIN_GEOMETRIES)}")

    print("Checking sample geometries...")
    check_samples()

    print("Running engine smoke test...")
    smoke_test()

    print("\nSetup complete!")
    print("\nCommand line:")
    print("python -m app.cli qcurv --level 2 --geometry equator-s4-in-s5")
    print("python -m app.cli verify covariance --geometry samples/wavy-surface.json --points 3")

    print("\nTo start the server:")
    print(f"uvicorn app.main:app --reload --host {settings.host} --port {settings.port}")

    print("\nAPI will be available at:")
    print(f"http://{settings.host}:{settings.port}/api/v1/run")
    print(f"http://{settings.host}:{settings.port}/docs (API documentation)")


if __name__ == "__main__":
    main()
