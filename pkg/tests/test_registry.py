import json

import numpy as np
import pytest

from gjms.errors import ExpressionSyntaxError, GeometrySpecError
from gjms.geometry import curvature_pack
from gjms.registry import (
    BUILTIN_GEOMETRIES,
    list_geometries,
    parse_geometry,
    random_perturbed_geometry,
    random_polynomial,
    resolve_geometry,
)


@pytest.fixture
def surface_document():
    return {
        "name": "bumped-plane",
        "n": 3,
        "k": 2,
        "metric": [["1 + 0.1*u1^2", "0", "0"], ["1", "0"], ["1"]],
        "graph": ["0.2*x1*x2"],
        "box": [[-0.4, 0.4], [-0.2, 0.3]],
        "tags": ["example"],
    }


class TestBuiltins:
    """Test the built-in geometry table."""

    def test_names(self):
        """Test the registered names."""
        assert set(BUILTIN_GEOMETRIES) == {
            "euclidean3",
            "sphere3",
            "sphere5",
            "equator-s2-in-s3",
            "equator-s4-in-s5",
            "great-circle-s1-in-s3",
            "clifford-torus",
            "small-sphere-umbilic",
        }

    @pytest.mark.parametrize("name", sorted(BUILTIN_GEOMETRIES))
    def test_builds_and_describes(self, name):
        """Test that each factory builds a consistent geometry."""
        spec = BUILTIN_GEOMETRIES[name]()
        description = spec.describe()
        assert description["name"] == name
        assert (description["n"], description["k"]) == (spec.n, spec.k)
        assert 1 <= spec.k < spec.n
        assert len(spec.box) == spec.k

    def test_factories_are_cached(self):
        """Test that repeated lookups share one object."""
        assert BUILTIN_GEOMETRIES["sphere3"]() is BUILTIN_GEOMETRIES["sphere3"]()

    def test_einstein_minimal_tags(self, equator_s4, sphere5, small_sphere):
        """Test the flags used to select closed-form oracles."""
        assert equator_s4.einstein and equator_s4.minimal
        assert sphere5.einstein and not sphere5.minimal
        assert not small_sphere.minimal
        assert "umbilic" in small_sphere.tags

    def test_listing(self):
        """Test the listing includes the seeded family."""
        names = [entry["name"] for entry in list_geometries()]
        assert names[-1] == "perturbed-random"
        assert set(BUILTIN_GEOMETRIES) <= set(names)


class TestSampling:
    """Test seeded sample points."""

    def test_reproducible(self, sphere5):
        """Test that equal seeds give equal points."""
        first = sphere5.sample_points(4, seed=3)
        second = sphere5.sample_points(4, seed=3)
        np.testing.assert_array_equal(np.array(first), np.array(second))

    def test_inside_box(self, clifford_torus):
        """Test points lie in the sampling box."""
        for point in clifford_torus.sample_points(20, seed=1):
            assert point.shape == (2,)
            assert np.all(np.abs(point) <= 0.5)


class TestPerturbedFamily:
    """Test the seeded perturbed-flat geometries."""

    def test_deterministic(self):
        """Test that a seed fixes the metric."""
        x = [0.1, -0.1, 0.2, 0.0, 0.05]
        a = random_perturbed_geometry(seed=5).metric.evaluate(x, 0).value
        b = random_perturbed_geometry(seed=5).metric.evaluate(x, 0).value
        c = random_perturbed_geometry(seed=6).metric.evaluate(x, 0).value
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_dimensions(self):
        """Test custom k and n."""
        spec = random_perturbed_geometry(seed=2, k=2, n=4)
        assert (spec.k, spec.n, spec.name) == (2, 4, "perturbed-random-2")
        assert not spec.einstein

    def test_conformally_flat_variant(self):
        """Test that the conformally flat variant has no Weyl curvature."""
        spec = random_perturbed_geometry(seed=4, conformally_flat=True)
        pack = curvature_pack(spec.metric, [0.1, 0.0, -0.1, 0.05, 0.02], 2)
        assert np.abs(pack.weyl.value).max() < 1e-12
        assert "conformally-flat" in spec.tags

    def test_generic_variant_is_curved(self, perturbed):
        """Test that the generic variant has Weyl curvature."""
        pack = curvature_pack(perturbed.metric, [0.1, 0.0, -0.1, 0.05, 0.02], 2)
        assert np.abs(pack.weyl.value).max() > 1e-4

    def test_polynomial_text(self, rng):
        """Test generated polynomials parse and vanish when no degrees are requested."""
        assert random_polynomial(rng, ["x1"], (), 1.0) == "0"
        text = random_polynomial(rng, ["x1", "x2"], (1, 2), 0.5)
        assert "x1*x2" in text


class TestParseGeometry:
    """Test the JSON geometry schema."""

    def test_graph_document(self, surface_document):
        """Test a graph with u aliases in the metric."""
        spec = parse_geometry(json.dumps(surface_document))
        assert (spec.name, spec.n, spec.k) == ("bumped-plane", 3, 2)
        assert spec.box == ((-0.4, 0.4), (-0.2, 0.3))
        assert spec.tags == frozenset({"example"})
        g = spec.metric.evaluate([0.0, 0.0, 2.0], 0).value
        assert g[0, 0] == pytest.approx(1.4)

    def test_lambda_alias(self, surface_document):
        """Test the Einstein constant under its JSON key."""
        surface_document["lambda"] = 0.0
        assert parse_geometry(json.dumps(surface_document).encode()).einstein

    def test_embedding_document(self):
        """Test an explicit embedding."""
        document = {"n": 3, "k": 1, "metric": [["1", "0", "0"], ["1", "0"], ["1"]], "embedding": ["x1", "x1^2", "0"]}
        spec = parse_geometry(json.dumps(document), name="parabola")
        assert spec.name == "parabola"
        assert spec.box == ((-0.5, 0.5),)

    def test_invalid_json(self):
        """Test that JSON errors report their position."""
        with pytest.raises(ExpressionSyntaxError) as info:
            parse_geometry('{"n": 3,\n "k": }')
        assert info.value.line == 2

    @pytest.mark.parametrize(
        "change",
        [
            {"k": 3},
            {"embedding": ["x1", "x2", "0"]},
            {"graph": ["0", "0"]},
            {"box": [[0.5, -0.5], [0.0, 1.0]]},
            {"unexpected": 1},
            {"metric": [["1", "0", "0"], ["1", "0"]]},
        ],
    )
    def test_schema_errors(self, surface_document, change):
        """Test documents that violate the schema."""
        surface_document.update(change)
        with pytest.raises(GeometrySpecError):
            parse_geometry(json.dumps(surface_document))

    def test_missing_field(self, surface_document):
        """Test the error location of a missing field."""
        del surface_document["metric"]
        with pytest.raises(GeometrySpecError) as info:
            parse_geometry(json.dumps(surface_document))
        assert info.value.message.startswith("metric")

    def test_expression_error(self, surface_document):
        """Test that bad expression text surfaces as a parse error."""
        surface_document["graph"] = ["0.2*x1 +"]
        with pytest.raises(ExpressionSyntaxError):
            parse_geometry(json.dumps(surface_document))


class TestResolveGeometry:
    """Test geometry references."""

    def test_builtin(self):
        """Test lookup by name."""
        assert resolve_geometry("clifford-torus").name == "clifford-torus"

    def test_seeded(self):
        """Test the seeded family name."""
        assert resolve_geometry("perturbed-random", seed=9).name == "perturbed-random-9"

    def test_file(self, tmp_path, surface_document):
        """Test a JSON file path."""
        del surface_document["name"]
        path = tmp_path / "wavy.json"
        path.write_text(json.dumps(surface_document))
        assert resolve_geometry(str(path)).name == "wavy"

    def test_unknown(self):
        """Test references that are neither names nor files."""
        with pytest.raises(GeometrySpecError):
            resolve_geometry("no-such-geometry")
