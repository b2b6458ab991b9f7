import json
import math

import numpy as np
import pytest

from app.config import Settings
from gjms.errors import InadmissibleError, ParameterRangeError
from gjms.registry import parse_geometry
from gjms.reports import PointRecord, Report
from gjms.runner import (
    COMMANDS,
    IDENTITIES,
    REFERENCES,
    VERIFY_TARGETS,
    RunOptions,
    VerificationRunner,
    get_runner,
    random_function,
    random_omega,
    run_command,
)


def options(**overrides):
    base = RunOptions(points=2, order=4, trials=1, seed=3)
    for key, value in overrides.items():
        setattr(base, key, value)
    return base


def residuals(report):
    return [r for p in report.points for r in p.residuals.values()]


class TestRunOptions:
    """Test option assembly."""

    def test_from_settings(self):
        """Test defaults taken from settings and None overrides ignored."""
        settings = Settings(jet_order=5, tolerance=1e-8, seed=4, sample_points=7)
        opts = RunOptions.from_settings(settings, level=2, f=None)
        assert (opts.order, opts.tol, opts.seed, opts.points, opts.level) == (5, 1e-8, 4, 7, 2)
        assert opts.f is None

    def test_params_drop_run_controls(self):
        """Test that params carry only operation inputs."""
        params = RunOptions(level=1).params()
        assert "tol" not in params and "seed" not in params
        assert params["level"] == 1
        assert "f" not in params

    def test_get_runner(self):
        """Test runner construction from settings."""
        runner = get_runner(Settings(jet_order=4))
        assert runner.options.order == 4
        assert get_runner().options.order == 6


class TestRandomInputs:
    """Test seeded function and conformal factor generators."""

    def test_function_is_seeded(self):
        """Test that a generator seed fixes the text."""
        a = random_function(np.random.default_rng(1), 3)
        b = random_function(np.random.default_rng(1), 3)
        assert a == b
        assert "x3" in a and "x4" not in a

    def test_omega_uses_ambient_coordinates(self):
        """Test conformal factors in x1..xn."""
        omega = random_omega(np.random.default_rng(2), 5)
        assert "x5" in omega


class TestDispatch:
    """Test command and target routing."""

    def test_tables(self):
        """Test that every command and target has an identity entry."""
        for key in COMMANDS[:-1] + VERIFY_TARGETS:
            assert key in IDENTITIES
            assert key in REFERENCES

    def test_one_reference_per_target(self):
        """Test that verify targets name distinct results."""
        names = [REFERENCES[target] for target in VERIFY_TARGETS]
        assert all(names)
        assert len(set(names)) == len(names)

    def test_unknown_command(self):
        """Test unknown command names."""
        with pytest.raises(ParameterRangeError):
            run_command("nonsense", "sphere3", options())

    def test_unknown_target(self):
        """Test unknown verify targets."""
        with pytest.raises(ParameterRangeError):
            run_command("verify", "sphere3", options(target="nonsense"))

    def test_missing_geometry(self):
        """Test commands that need a geometry."""
        with pytest.raises(ParameterRangeError):
            run_command("qcurv", None, options())


class TestCommands:
    """Test the per-point commands."""

    def test_curvature(self):
        """Test curvature records on the round 3-sphere."""
        report = run_command("curvature", "equator-s2-in-s3", options())
        assert report.passed
        assert report.points[0].values["R"] == pytest.approx(6.0, abs=1e-9)
        assert "einstein" in report.points[0].residuals

    def test_extrinsic(self):
        """Test the traced Gauss residual on a generic surface."""
        report = run_command("extrinsic", "sphere3", options())
        assert report.passed
        assert {"|H|^2", "|L0|^2", "Q2"} <= set(report.points[0].values)

    def test_qcurv_closed_form(self):
        """Test Q4 = 6 on the equatorial 4-sphere."""
        report = run_command("qcurv", "equator-s4-in-s5", options(level=2))
        assert report.passed
        for point in report.points:
            assert point.values["Q4"] == pytest.approx(6.0, abs=1e-8)
            assert point.values["expected"] == 6.0

    def test_qcurv_level_range(self):
        """Test unsupported Q levels."""
        with pytest.raises(ParameterRangeError):
            run_command("qcurv", "sphere3", options(level=3))

    def test_apply_checks_factorization(self):
        """Test P4 on the equatorial 2-sphere against the factorized form."""
        report = run_command("apply", "equator-s2-in-s3", options(level=2, f="x1^2 + x2"))
        assert report.passed
        assert "factorization" in report.points[0].residuals

    def test_apply_sixth_order(self):
        """Test factorized P6 on the Clifford torus."""
        report = run_command("apply", "clifford-torus", options(level=3, order=6, points=1))
        assert "P6f" in report.points[0].values
        assert math.isfinite(report.points[0].values["P6f"])

    def test_sixth_order_needs_einstein_minimal(self):
        """Test P6 on a geometry without the tag."""
        with pytest.raises(InadmissibleError):
            run_command("apply", "sphere3", options(level=3, order=6, points=1))

    def test_spectrum(self):
        """Test eigenvalues of P4 on the 2-sphere."""
        report = run_command("spectrum", None, options(k=2, l=2, mmax=3))
        assert [p.values["eigenvalue"] for p in report.points] == pytest.approx([0, 0, 24, 120])
        assert report.geometry is None
        assert report.passed

    def test_spectrum_needs_parameters(self):
        """Test spectrum without k."""
        with pytest.raises(ParameterRangeError):
            run_command("spectrum", None, options(l=2))

    def test_geometries(self):
        """Test the listing command."""
        report = run_command("geometries", None, options())
        labels = [p.label for p in report.points]
        assert "clifford-torus" in labels and "perturbed-random" in labels


class TestVerifyTargets:
    """Test identity checks end to end."""

    @pytest.mark.parametrize(
        "target,geometry,order",
        [
            ("covariance", "sphere3", 4),
            ("q-covariance", "sphere3", 4),
            ("gauss-codazzi", "sphere5", 4),
            ("pipeline", "sphere3", 4),
            ("u4", "sphere5", 4),
            ("factorization", "clifford-torus", 4),
            ("umbilic", "small-sphere-umbilic", 5),
            ("decomposition", "sphere5", 5),
            ("tilde-covariance", "sphere5", 5),
            ("normalization", "sphere3", 4),
        ],
    )
    def test_target_passes(self, target, geometry, order):
        """Test that each identity holds on a suitable geometry."""
        report = run_command("verify", geometry, options(target=target, order=order, points=1))
        assert report.command == f"verify {target}"
        assert report.identity == IDENTITIES[target]
        assert json.loads(report.to_json())["paper_ref"] == REFERENCES[target]
        assert residuals(report)
        assert report.passed, report.max_residual()

    def test_factorization_needs_tag(self):
        """Test the factorization target on a generic surface."""
        with pytest.raises(InadmissibleError):
            run_command("verify", "sphere3", options(target="factorization"))

    @staticmethod
    def equator_file(embedding, tags):
        factor = "4/(1+x1^2+x2^2+x3^2)^2"
        document = {
            "n": 3,
            "k": 2,
            "metric": [[factor, "0", "0"], [factor, "0"], [factor]],
            "embedding": embedding,
            "lambda": 1.0,
            "box": [[-0.3, 0.3], [-0.3, 0.3]],
            "tags": tags,
        }
        return parse_geometry(json.dumps(document), name="equator-file")

    def test_file_geometry_needs_minimal_tag(self):
        """Test that an Einstein constant alone does not admit the factorization."""
        spec = self.equator_file(["x1", "x2", "0"], [])
        with pytest.raises(InadmissibleError):
            run_command("verify", spec, options(target="factorization"))

    def test_file_geometry_with_minimal_tag(self):
        """Test the factorization on a tagged geometry file."""
        spec = self.equator_file(["x1", "x2", "0"], ["minimal"])
        report = run_command("verify", spec, options(target="factorization"))
        assert report.passed, report.max_residual()
        assert all(p.residuals["|H|"] < 1e-12 for p in report.points)

    def test_mistagged_geometry_fails(self):
        """Test that a non-minimal surface tagged minimal fails at tolerance."""
        spec = self.equator_file(["x1", "x2", "0.3*x1^2 + 0.1*x2"], ["minimal"])
        report = run_command("verify", spec, options(target="factorization"))
        assert not report.passed
        assert all(p.residuals["|H|"] > 1e-3 for p in report.points)

    def test_normalization_appends_trace_record(self):
        """Test the trace-consistency record."""
        report = run_command("verify", "sphere3", options(target="normalization", points=1))
        last = report.points[-1]
        assert last.label == "trace-consistency"
        assert last.values["a2_inverse"] == 4
        assert last.values["a3_inverse"] == -64
        assert last.residuals["a_recurrence"] == 0.0

    def test_reproducible(self):
        """Test that equal seeds give identical reports apart from timing."""
        first = run_command("verify", "sphere3", options(target="covariance"))
        second = run_command("verify", "sphere3", options(target="covariance"))
        assert first.to_json(timing=False) == second.to_json(timing=False)

    def test_threaded_sweep_matches_serial(self):
        """Test that worker threads keep point order and results."""
        serial = run_command("verify", "sphere3", options(target="gauss-codazzi", points=3))
        threaded = run_command("verify", "sphere3", options(target="gauss-codazzi", points=3, max_workers=3))
        assert serial.to_json(timing=False) == threaded.to_json(timing=False)

    def test_runner_reuses_options(self):
        """Test a runner bound to options."""
        runner = VerificationRunner(options(target="gauss-codazzi", points=1))
        assert runner.run("verify", "sphere5").passed


class TestReport:
    """Test pass evaluation and rendering."""

    def make(self, *values, tol=1e-6):
        points = [PointRecord(x=[0.1, 0.2], values={"Q": 1.0}, residuals={"r": v}) for v in values]
        return Report(command="verify demo", geometry="g", points=points, tol=tol).evaluate()

    def test_pass_and_fail(self):
        """Test the tolerance comparison."""
        assert self.make(1e-9, 5e-7).passed
        assert not self.make(1e-9, 2e-6).passed

    def test_nan_fails(self):
        """Test that non-finite residuals never pass."""
        report = self.make(float("nan"))
        assert not report.passed
        assert json.loads(report.to_json())["points"][0]["residuals"]["r"] is None

    def test_json_layout(self):
        """Test the pass alias and full-precision floats."""
        report = self.make(0.1)
        data = json.loads(report.to_json())
        assert data["pass"] is False
        assert data["points"][0]["residuals"]["r"] == 0.1
        assert '"Q": 1.0' in report.to_json()

    def test_csv(self):
        """Test one row per point."""
        lines = self.make(1e-9, 2e-9).to_csv().splitlines()
        assert lines[0] == "label,x1,x2,Q,residual:r"
        assert len(lines) == 3

    def test_write(self, tmp_path):
        """Test writing to a file."""
        path = tmp_path / "report.csv"
        self.make(1e-9).write(path, "csv")
        assert path.read_text().startswith("label,")
