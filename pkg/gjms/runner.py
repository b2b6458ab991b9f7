"""
Command orchestration. Every command and verify target is a per-point handler
run over seeded sample points of a geometry; records are merged in point order
into a Report whose ``pass`` flag compares residuals against the tolerance.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from datetime import datetime
from typing import Callable, Optional, Union

import numpy as np

from gjms.einstein import factorized_apply, q_closed_form, sphere_eigenvalue
from gjms.errors import InadmissibleError, ParameterRangeError
from gjms.geometry import curvature_pack, einstein_residual
from gjms.normalform import (
    U4Placeholder,
    closed_form_gap,
    q_trace_consistency,
    trace_identity_residual,
    u4_perturbation,
)
from gjms.operators import (
    Residual,
    admissible,
    covariance_residual,
    decomposition_residual,
    extrinsic_coefficients,
    q_covariance_residual,
    require_admissible,
    tilde_covariance_residual,
    umbilic_residual,
)
from gjms.registry import GeometrySpec, list_geometries, random_polynomial, resolve_geometry
from gjms.reports import PointRecord, Report
from gjms.submanifold import ExtrinsicPack, extrinsic_pack, gauss_codazzi_residuals

logger = logging.getLogger(__name__)

IDENTITIES = {
    "curvature": "Riemann splits into Weyl plus the Kulkarni-Nomizu product of Schouten and g",
    "extrinsic": "traced Gauss equation J + k|H|^2/2 = Jbar + G",
    "qcurv": "Q of minimal Sigma in an Einstein ambient is lam^l prod_j (k/2 - l + j)",
    "apply": "P_2l of minimal Sigma in an Einstein ambient is prod_j (-Laplacian + lam c_j)",
    "spectrum": "prod_j c_j = (k/2 - l) Q_2l on constants",
    "geometries": None,
    "covariance": "P^(e^{2w} g) f = e^{-(k/2+l) w} P^g (e^{(k/2-l) w} f)",
    "q-covariance": "e^{kw} Qhat = Q + P w for k = 2l, e^{2lw} Qhat = Q + e^{-sw} (P - sQ) e^{sw} / s otherwise",
    "gauss-codazzi": "Gauss, Codazzi and traced Gauss relations with the Fialkow tensors",
    "pipeline": "normal-form P4 equals the closed form; 8 tr h4 trace identity",
    "u4": "P4 and Q4 are independent of the free r^4 coefficient; h4 shifts by -2 L0 . dU",
    "factorization": "P_2l = prod_j (-Laplacian + lam c_j) for minimal Sigma in an Einstein ambient",
    "umbilic": "P4 equals the intrinsic Paneitz operator for umbilic Sigma in a conformally flat ambient",
    "decomposition": "T = Tbar + Ttilde, Q4 = Qbar4 + Qtilde4, Q2 = Jbar + G",
    "tilde-covariance": "P4 - Pbar4 is conformally covariant of bidegree (k/2 - 2, -k/2 - 2)",
    "normalization": "P_2l 1 = (k/2 - l) Q_2l; tr h2, tr h4 enter Q with a_l^-1 = -1, 4",
}

# Short name of the result each command checks; one per verify target.
REFERENCES = {
    "curvature": "Weyl-Schouten decomposition of the curvature tensor",
    "extrinsic": "traced Gauss equation",
    "qcurv": "Q-curvature of minimal submanifolds of Einstein manifolds",
    "apply": "factorization of P_2l for minimal submanifolds of Einstein manifolds",
    "spectrum": "spectrum of the factorized operators on round spheres",
    "geometries": None,
    "covariance": "conformal covariance of P_2l",
    "q-covariance": "conformal transformation law of Q_2l",
    "gauss-codazzi": "Gauss and Codazzi equations with the Fialkow tensor",
    "pipeline": "closed forms of Q2, T and Q4",
    "u4": "independence of P4 and Q4 from the undetermined r^4 coefficient",
    "factorization": "factorization of P_2l for minimal submanifolds of Einstein manifolds",
    "umbilic": "P4 of umbilic submanifolds of conformally flat manifolds",
    "decomposition": "splitting of T and Q4 into intrinsic and tilde parts",
    "tilde-covariance": "conformal covariance of P4 - Pbar4",
    "normalization": "normalization of Q_2l by the constant term of P_2l",
}

COMMANDS = ("curvature", "extrinsic", "qcurv", "apply", "spectrum", "geometries", "verify")
VERIFY_TARGETS = (
    "covariance",
    "q-covariance",
    "gauss-codazzi",
    "pipeline",
    "u4",
    "factorization",
    "umbilic",
    "decomposition",
    "tilde-covariance",
    "normalization",
)


@dataclass
class RunOptions:
    tol: float = 1e-6
    seed: int = 0
    points: int = 5
    order: int = 6
    level: Optional[int] = None
    f: Optional[str] = None
    target: Optional[str] = None
    trials: int = 3
    k: Optional[int] = None
    l: Optional[int] = None
    mmax: int = 4
    lam: float = 1.0
    max_workers: int = 1

    @classmethod
    def from_settings(cls, settings, **overrides) -> "RunOptions":
        base = cls(
            tol=settings.tolerance,
            seed=settings.seed,
            points=settings.sample_points,
            order=settings.jet_order,
            max_workers=settings.max_workers,
        )
        return replace(base, **{key: value for key, value in overrides.items() if value is not None})

    def params(self) -> dict:
        data = asdict(self)
        for key in ("tol", "seed", "max_workers"):
            data.pop(key)
        return {key: value for key, value in data.items() if value is not None}


def random_function(rng: np.random.Generator, k: int, terms: int = 2) -> str:
    """Seeded trigonometric polynomial in x1..xk."""
    parts = []
    for _ in range(terms):
        freqs = rng.uniform(-1.5, 1.5, k)
        phase = float(rng.uniform(0.0, 2 * math.pi))
        amplitude = float(rng.uniform(0.5, 1.5))
        argument = " + ".join(f"({float(w)!r})*x{i + 1}" for i, w in enumerate(freqs))
        parts.append(f"{amplitude!r}*sin({argument} + {phase!r})")
    return " + ".join(parts)


def random_omega(rng: np.random.Generator, n: int, amplitude: float = 0.2) -> str:
    """Seeded cubic conformal factor in the ambient coordinates."""
    return random_polynomial(rng, [f"x{i + 1}" for i in range(n)], (1, 2, 3), amplitude)


PointHandler = Callable[[GeometrySpec, np.ndarray, np.random.Generator, RunOptions], PointRecord]


class VerificationRunner:
    def __init__(self, options: Optional[RunOptions] = None):
        self.options = options or RunOptions()
        self.point_handlers: dict[str, PointHandler] = {
            "curvature": self._curvature,
            "extrinsic": self._extrinsic,
            "qcurv": self._qcurv,
            "apply": self._apply,
            "covariance": self._covariance,
            "q-covariance": self._q_covariance,
            "gauss-codazzi": self._gauss_codazzi,
            "pipeline": self._pipeline,
            "u4": self._u4,
            "factorization": self._factorization,
            "umbilic": self._umbilic,
            "decomposition": self._decomposition,
            "tilde-covariance": self._tilde_covariance,
            "normalization": self._normalization,
        }

    def run(
        self,
        command: str,
        geometry: Union[GeometrySpec, str, None] = None,
        options: Optional[RunOptions] = None,
    ) -> Report:
        options = options or self.options
        started = time.perf_counter()
        if command not in COMMANDS:
            raise ParameterRangeError(f"unknown command {command!r}")
        key = command
        if command == "verify":
            if options.target not in VERIFY_TARGETS:
                raise ParameterRangeError(f"unknown verify target {options.target!r}")
            key = options.target

        spec = None
        if command == "spectrum":
            records = self._spectrum(options)
        elif command == "geometries":
            records = [self._listing(entry) for entry in list_geometries()]
        else:
            if geometry is None:
                raise ParameterRangeError(f"command {command!r} needs a geometry")
            spec = resolve_geometry(geometry, options.seed) if isinstance(geometry, str) else geometry
            logger.info(f"Running {key} on {spec.name} (n={spec.n}, k={spec.k}) over {options.points} points")
            records = self._sweep(spec, options, self.point_handlers[key])
            if key == "normalization":
                records.append(self._trace_consistency())

        report = Report(
            command=command if command != "verify" else f"verify {key}",
            geometry=None if spec is None else spec.name,
            params=options.params(),
            seed=options.seed,
            points=records,
            tol=options.tol,
            reference=REFERENCES.get(key),
            identity=IDENTITIES.get(key),
            timing={
                "timestamp": datetime.utcnow().isoformat(),
                "wall_seconds": time.perf_counter() - started,
            },
        ).evaluate()
        logger.info(f"{report.command}: pass={report.passed} max residual={report.max_residual():.3e}")
        return report

    def _sweep(self, spec: GeometrySpec, options: RunOptions, handler: PointHandler) -> list[PointRecord]:
        points = spec.sample_points(options.points, options.seed)

        def job(item: tuple[int, np.ndarray]) -> PointRecord:
            index, x = item
            rng = np.random.default_rng([options.seed, index])
            record = handler(spec, x, rng, options)
            record.x = [float(v) for v in x]
            logger.debug(f"point {index}: residuals={record.residuals}")
            return record

        if options.max_workers > 1 and len(points) > 1:
            with ThreadPoolExecutor(max_workers=options.max_workers) as pool:
                return list(pool.map(job, enumerate(points)))
        return [job(item) for item in enumerate(points)]

    # --- helpers ---

    @staticmethod
    def _listing(entry: dict) -> PointRecord:
        values = {"n": entry["n"], "k": entry["k"]}
        if entry["lambda"] is not None:
            values["lambda"] = entry["lambda"]
        return PointRecord(label=entry["name"], values=values)

    @staticmethod
    def _epack(spec: GeometrySpec, x: np.ndarray, options: RunOptions) -> ExtrinsicPack:
        return extrinsic_pack(spec.metric, spec.embedding, x, options.order)

    @staticmethod
    def _functions(spec: GeometrySpec, rng: np.random.Generator, options: RunOptions) -> list[str]:
        if options.f is not None:
            return [options.f]
        return [random_function(rng, spec.k) for _ in range(options.trials)]

    @staticmethod
    def _omegas(spec: GeometrySpec, rng: np.random.Generator, options: RunOptions) -> list:
        if spec.omega is not None:
            return [spec.omega]
        return [random_omega(rng, spec.n) for _ in range(options.trials)]

    @staticmethod
    def _levels(spec: GeometrySpec, options: RunOptions) -> list[int]:
        if options.level is not None:
            return [options.level]
        return [level for level in (1, 2) if admissible(spec.k, spec.n, level) and not (level == 2 and spec.n == 4)]

    @staticmethod
    def _require_einstein_minimal(spec: GeometrySpec) -> float:
        if not (spec.einstein and spec.minimal):
            raise InadmissibleError(f"{spec.name} is not tagged as a minimal submanifold of an Einstein ambient")
        return spec.lam

    # --- commands ---

    def _curvature(self, spec, x, rng, options) -> PointRecord:
        z = spec.embedding.evaluate(x, 0).value
        pack = curvature_pack(spec.metric, z, options.order)
        values = {"R": float(pack.scalar.value), "J": float(pack.J.value)}
        for name in ("weyl", "cotton", "bach"):
            tensor = getattr(pack, name)
            if tensor is not None:
                values[f"|{name}|max"] = float(np.abs(tensor.value).max())
        residuals = {"bianchi": pack.bianchi_residual()}
        if pack.schouten is not None:
            residuals["decomposition"] = pack.decomposition_residual()
        if spec.lam is not None:
            residuals["einstein"] = einstein_residual(pack, spec.lam)
        return PointRecord(values=values, residuals=residuals)

    def _extrinsic(self, spec, x, rng, options) -> PointRecord:
        epack = self._epack(spec, x, options)
        coeffs = extrinsic_coefficients(epack, 1)
        values = {
            "|H|^2": float(epack.norm2(epack.mean_curvature, "n").value),
            "|L0|^2": float(epack.norm2(epack.traceless, "ttn").value),
            "Q2": float(coeffs.q2.value),
        }
        residuals = {}
        if spec.k >= 2:
            residuals["traced_gauss"] = gauss_codazzi_residuals(epack).trace
        return PointRecord(values=values, residuals=residuals)

    def _qcurv(self, spec, x, rng, options) -> PointRecord:
        level = options.level or 1
        if level not in (1, 2):
            raise ParameterRangeError(f"qcurv supports level 1 or 2, got {level}")
        require_admissible(spec.k, spec.n, level)
        coeffs = extrinsic_coefficients(self._epack(spec, x, options), level)
        q = float((coeffs.q2 if level == 1 else coeffs.q4).value)
        record = PointRecord(values={f"Q{2 * level}": q})
        if spec.einstein and spec.minimal:
            expected = q_closed_form(spec.k, level, spec.lam)
            record.values["expected"] = expected
            record.residuals["closed_form"] = Residual(abs(q - expected), abs(expected)).relative
        return record

    def _apply(self, spec, x, rng, options) -> PointRecord:
        level = options.level or 2
        f = options.f or random_function(rng, spec.k)
        epack = self._epack(spec, x, options)
        if level == 3:
            lam = self._require_einstein_minimal(spec)
            return PointRecord(values={"P6f": factorized_apply(epack.chart, lam, 3, f)})
        require_admissible(spec.k, spec.n, level)
        value = extrinsic_coefficients(epack, level).apply(level, f)
        record = PointRecord(values={f"P{2 * level}f": value})
        if spec.einstein and spec.minimal:
            factored = factorized_apply(epack.chart, spec.lam, level, f)
            record.values["factorized"] = factored
            record.residuals["factorization"] = Residual(abs(value - factored), abs(value)).relative
        return record

    def _spectrum(self, options: RunOptions) -> list[PointRecord]:
        if options.k is None or options.l is None:
            raise ParameterRangeError("spectrum needs k and l")
        k, level, lam = options.k, options.l, options.lam
        records = []
        for m in range(options.mmax + 1):
            record = PointRecord(
                label=f"m={m}",
                values={"m": m, "eigenvalue": sphere_eigenvalue(k, m, level, lam)},
            )
            if m == 0:
                constant = (k / 2 - level) * q_closed_form(k, level, lam)
                record.residuals["constant_term"] = Residual(
                    abs(record.values["eigenvalue"] - constant), abs(constant)
                ).relative
            records.append(record)
        return records

    # --- verify targets ---

    def _covariance(self, spec, x, rng, options) -> PointRecord:
        record = PointRecord()
        for level in self._levels(spec, options):
            for trial, (omega, f) in enumerate(zip(self._omegas(spec, rng, options), self._functions(spec, rng, options))):
                r = covariance_residual(spec.metric, spec.embedding, level, omega, f, x, options.order)
                record.residuals[f"P{2 * level}:{trial}"] = r.relative
        return record

    def _q_covariance(self, spec, x, rng, options) -> PointRecord:
        record = PointRecord()
        k, n = spec.k, spec.n
        for trial, omega in enumerate(self._omegas(spec, rng, options)):
            for level in self._levels(spec, options):
                critical = 2 * level == k
                r = q_covariance_residual(
                    spec.metric, spec.embedding, omega, x, options.order, critical=critical, level=level
                )
                kind = "critical" if critical else "shifted"
                record.residuals[f"Q{2 * level}:{kind}:{trial}"] = r.relative
        return record

    def _gauss_codazzi(self, spec, x, rng, options) -> PointRecord:
        gc = gauss_codazzi_residuals(self._epack(spec, x, options))
        residuals = {"traced_gauss": gc.trace, "codazzi": gc.codazzi}
        if gc.gauss is not None:
            residuals["gauss"] = gc.gauss
        return PointRecord(residuals=residuals)

    def _pipeline(self, spec, x, rng, options) -> PointRecord:
        require_admissible(spec.k, spec.n, 2)
        epack = self._epack(spec, x, options)
        record = PointRecord(residuals={"trace_h4": trace_identity_residual(epack).relative})
        for trial, f in enumerate(self._functions(spec, rng, options)):
            u4 = U4Placeholder.random(epack.codim, rng)
            record.residuals[f"P4:{trial}"] = closed_form_gap(epack, f, u4).relative
        return record

    def _u4(self, spec, x, rng, options) -> PointRecord:
        require_admissible(spec.k, spec.n, 2)
        epack = self._epack(spec, x, options)
        first = U4Placeholder.random(epack.codim, rng)
        second = U4Placeholder.random(epack.codim, rng)
        f = self._functions(spec, rng, options)[0]
        report = u4_perturbation(epack, first, second, f)
        return PointRecord(
            residuals={
                "h4": report.h4_difference,
                "trace_h4": report.trace_h4_difference.relative,
                "Q4": report.q4_difference.relative,
                "P4": report.p4_difference.relative,
            }
        )

    def _factorization(self, spec, x, rng, options) -> PointRecord:
        lam = self._require_einstein_minimal(spec)
        epack = self._epack(spec, x, options)
        # the minimal tag is trusted by the factorization; a mistagged geometry fails here
        record = PointRecord(residuals={"|H|": float(np.linalg.norm(epack.mean_curvature.value))})
        for level in self._levels(spec, options):
            coeffs = extrinsic_coefficients(epack, level)
            for trial, f in enumerate(self._functions(spec, rng, options)):
                closed = coeffs.apply(level, f)
                factored = factorized_apply(epack.chart, lam, level, f)
                record.residuals[f"P{2 * level}:{trial}"] = Residual(abs(closed - factored), abs(closed)).relative
        return record

    def _umbilic(self, spec, x, rng, options) -> PointRecord:
        epack = self._epack(spec, x, options)
        record = PointRecord(values={"|L0|^2": float(epack.norm2(epack.traceless, "ttn").value)})
        for trial, f in enumerate(self._functions(spec, rng, options)):
            record.residuals[f"P4:{trial}"] = umbilic_residual(epack, f).relative
        return record

    def _decomposition(self, spec, x, rng, options) -> PointRecord:
        d = decomposition_residual(self._epack(spec, x, options))
        return PointRecord(residuals={"T": d.t, "Q4": d.q4, "Q2": d.q2})

    def _tilde_covariance(self, spec, x, rng, options) -> PointRecord:
        record = PointRecord()
        for trial, (omega, f) in enumerate(zip(self._omegas(spec, rng, options), self._functions(spec, rng, options))):
            results = tilde_covariance_residual(spec.metric, spec.embedding, omega, f, x, options.order)
            for name, r in results.items():
                record.residuals[f"{name}:{trial}"] = r.relative
        return record

    def _normalization(self, spec, x, rng, options) -> PointRecord:
        epack = self._epack(spec, x, options)
        record = PointRecord()
        for level in self._levels(spec, options):
            coeffs = extrinsic_coefficients(epack, level)
            q = coeffs.q2 if level == 1 else coeffs.q4
            expected = (spec.k / 2 - level) * float(q.value)
            value = coeffs.apply(level, "1")
            record.residuals[f"P{2 * level}1"] = Residual(abs(value - expected), abs(expected)).relative
        return record

    @staticmethod
    def _trace_consistency() -> PointRecord:
        report = q_trace_consistency()
        return PointRecord(
            label="trace-consistency",
            values={
                "q2_coefficient": report.q2_coefficient,
                "q4_coefficient": report.q4_coefficient,
                "a1_inverse": report.a_inverse[1],
                "a2_inverse": report.a_inverse[2],
                "a3_inverse": report.a_inverse[3],
            },
            residuals={
                "q2": report.q2_residual,
                "q4": report.q4_residual,
                # a_{l+1}^-1 = -4 l^2 a_l^-1
                "a_recurrence": float(
                    max(abs(report.a_inverse[level + 1] + 4 * level**2 * report.a_inverse[level]) for level in (1, 2))
                ),
            },
        )


def run_command(
    command: str,
    geometry: Union[GeometrySpec, str, None] = None,
    options: Optional[RunOptions] = None,
) -> Report:
    return VerificationRunner(options).run(command, geometry)


def get_runner(settings=None) -> VerificationRunner:
    """Runner configured from application settings."""
    if settings is None:
        return VerificationRunner()
    return VerificationRunner(RunOptions.from_settings(settings))
