import json

import pytest

from datalad_perturb.config import resolve_resource
from datalad_perturb.exceptions import (
    CatalogError,
    DataError,
    UsageError,
)
from datalad_perturb.metadata import (
    Direction,
    FeatureMetadata,
    MetadataCatalog,
    ThresholdConfig,
    effective_cardinality,
    load_catalog,
    validate_catalog,
)


def _entry(name, **kw):
    rec = {
        "name": name,
        "is_protocol_id": False,
        "is_critical_identifier": False,
        "is_functional_integrity": False,
        "direction": "forward",
        "is_flow_wide_aggregate": False,
    }
    rec.update(kw)
    return rec


def test_load_catalog(tmp_path):
    path = tmp_path / "catalog.json"
    path.write_text(
        json.dumps([_entry("sport"), _entry("dttl", direction="backward",
                                            declared_cardinality=256)])
    )
    catalog = load_catalog(path)
    assert catalog.names == ["sport", "dttl"]
    dttl = catalog.get("dttl")
    assert dttl.direction is Direction.BACKWARD
    assert dttl.direction.attacker_inaccessible
    assert dttl.declared_cardinality == 256
    assert "declared_cardinality" not in catalog.get("sport").to_dict()


def test_load_catalog_syntax_error_position(tmp_path):
    path = tmp_path / "catalog.json"
    path.write_text('[\n  {"name": "a",\n')
    with pytest.raises(CatalogError, match=r":3:\d+:"):
        load_catalog(path)


@pytest.mark.parametrize(
    "rec, message",
    [
        (_entry("a", colour="red"), "unknown key"),
        ({"name": "a", "direction": "forward"}, "missing required key"),
        (_entry("a", direction="sideways"), "unknown direction"),
        (_entry("a", is_protocol_id="yes"), "must be true or false"),
        (_entry("a", declared_cardinality=0), "declared_cardinality"),
    ],
)
def test_load_catalog_schema_violations(tmp_path, rec, message):
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps([rec]))
    with pytest.raises(CatalogError, match=message):
        load_catalog(path)


def test_load_catalog_needs_array(tmp_path):
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps(_entry("a")))
    with pytest.raises(CatalogError, match="array"):
        load_catalog(path)


def test_duplicate_names():
    with pytest.raises(CatalogError, match="duplicate"):
        MetadataCatalog((FeatureMetadata("a"), FeatureMetadata("a")))


def test_align():
    catalog = MetadataCatalog((FeatureMetadata("a"), FeatureMetadata("b")))
    assert [m.name for m in catalog.align(["b", "a"])] == ["b", "a"]
    with pytest.raises(DataError, match="without annotation: c"):
        catalog.align(["a", "c"])


def test_validate_catalog():
    catalog = MetadataCatalog(
        (
            FeatureMetadata("a", direction="forward"),
            FeatureMetadata("c", direction="forward"),
        )
    )
    issues = validate_catalog(catalog, ["a", "b"])
    assert {(i.kind, i.feature) for i in issues} == {
        ("unannotated", "b"),
        ("no-column", "c"),
    }
    assert validate_catalog(catalog, ["a", "c"]) == []


def test_validate_catalog_contradictions():
    catalog = MetadataCatalog(
        (
            FeatureMetadata("dstip", is_critical_identifier=True, direction="backward"),
            FeatureMetadata("proto", is_protocol_id=True, is_flow_wide_aggregate=True),
        )
    )
    issues = validate_catalog(catalog, ["dstip", "proto"])
    assert [i.kind for i in issues] == ["contradiction"] * 3
    assert {i.feature for i in issues} == {"dstip", "proto"}


def test_threshold_config_defaults():
    cfg = ThresholdConfig()
    assert (cfg.min_r, cfg.max_r, cfg.tau, cfg.corr_threshold) == (2, 255, 0.87, 0.8)


@pytest.mark.parametrize(
    "kw",
    [
        dict(min_r=255, max_r=2),
        dict(min_r=0),
        dict(tau=0.0),
        dict(tau=1.5),
        dict(corr_threshold=1.0),
        dict(hist_bin_width=0.0),
    ],
)
def test_threshold_config_rejects(kw):
    with pytest.raises(UsageError):
        ThresholdConfig(**kw)


def test_effective_cardinality():
    assert effective_cardinality([0, 1, 0, 1, 1]) == 2
    assert effective_cardinality([3.5, 3.5]) == 1
    assert effective_cardinality([1, 2, 3], declared=300) == 300
    with pytest.raises(DataError):
        effective_cardinality([])


@pytest.mark.parametrize(
    "name, n_features", [("unsw-nb15", 47), ("cse-cic-ids2018", 88)]
)
def test_builtin_catalogs(name, n_features):
    catalog = load_catalog(resolve_resource(f"builtin:{name}", "catalog"))
    assert len(catalog) == n_features
    fixture = json.loads(
        resolve_resource(f"builtin:{name}", "fixture").read_text(encoding="utf-8")
    )
    assert [r["name"] for r in fixture] == catalog.names
    # the shipped annotations are free of contradictions
    assert validate_catalog(catalog, catalog.names) == []
