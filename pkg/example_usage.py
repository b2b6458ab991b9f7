"""
Example usage of the GJMS verification API.
This script demonstrates how to run commands and verify targets programmatically.
"""

from typing import Any, Dict, Optional

import httpx


class GJMSAPIClient:
    """Client for the GJMS verification API."""

    def __init__(self, base_url: str = "http://localhost:8000", timeout: float = 300.0):
        self.base_url = base_url
        self.client = httpx.Client(base_url=base_url, timeout=timeout)

    def get_health_status(self) -> dict:
        """Get API health status."""
        return self.client.get("/api/v1/health").json()

    def list_geometries(self) -> list:
        return self.client.get("/api/v1/geometries").json()["geometries"]

    def run(
        self,
        command: str,
        geometry: Optional[Any] = None,
        target: Optional[str] = None,
        **options,
    ) -> Dict[str, Any]:
        """Run a command (or verify target) and return the report."""
        payload = {"command": command, "geometry": geometry, "target": target, "options": options}
        response = self.client.post("/api/v1/run", json=payload)
        if response.status_code != 200:
            raise Exception(f"Run failed ({response.status_code}): {response.text}")
        return response.json()


def show(report: Dict[str, Any]):
    status = "PASS" if report["pass"] else "FAIL"
    print(f"[{status}] {report['command']} on {report['geometry']}")
    if report.get("identity"):
        print(f"   identity: {report['identity']}")
    for point in report["points"]:
        where = point.get("label") or point.get("x")
        values = ", ".join(f"{k}={v:.6g}" for k, v in point["values"].items())
        worst = max(point["residuals"].values(), default=0.0)
        print(f"   {where}: {values}  worst residual {worst:.2e}")


def main():
    """Main demo function."""
    print("GJMS Verification Service - Example Usage")
    print("=" * 40)

    client = GJMSAPIClient()

    try:
        health = client.get_health_status()
        print(f"API Status: {health['status']}")
        print(f"Service: {health['service']}")
    except httpx.HTTPError as e:
        print(f"API not available: {e}")
        return

    print("\nExample 1: built-in geometries")
    for entry in client.list_geometries():
        print(f"   {entry['name']}: n={entry['n']}, k={entry['k']}, lambda={entry['lambda']}")

    print("\nExample 2: Q4 of the equatorial 4-sphere (expected 6)")
    show(client.run("qcurv", "equator-s4-in-s5", level=2, order=4, points=2))

    print("\nExample 3: P4 spectrum of the round 2-sphere")
    show(client.run("spectrum", k=2, l=2, mmax=4))

    print("\nExample 4: conformal covariance on a seeded perturbed geometry")
    show(client.run("verify", "perturbed-random", target="covariance", order=4, points=2, trials=1, seed=7))

    print("\nExample 5: inline geometry")
    surface = {
        "n": 3,
        "k": 2,
        "metric": [["1", "0", "0"], ["1", "0"], ["1"]],
        "graph": ["0.3*x1^2 - 0.2*x2^2"],
    }
    show(client.run("extrinsic", surface, order=3, points=1))

    print("\nDemo completed!")


if __name__ == "__main__":
    main()
