import json
import pytest
from tldrisk import capec
from tldrisk.exceptions import DocumentParseError, IntegrityError, NotFoundError
from tldrisk.models import AbstractionEnum
from tests.fixtures import pattern_catalog, bundled_loader

@pytest.fixture()
def make_catalog_document():
    def make(*overrides):
        patterns = [
            {"id": "CAPEC-542", "name": "Targeted Malware", "abstraction": "Standard"},
            {"id": "CAPEC-165", "name": "File Manipulation", "abstraction": "standard",
                "likelihood_default": 3, "severity_default": 4, "skill_required": 2},
        ]
        patterns.extend(overrides)
        return json.dumps({"patterns": patterns})

    return make

def test_bundled_catalog_has_nine_standard_patterns(pattern_catalog):
    assert len(pattern_catalog.patterns) == 9
    assert {p.abstraction for p in pattern_catalog.patterns.values()} == {AbstractionEnum.STANDARD}

def test_bundled_catalog_is_valid(pattern_catalog):
    report = capec.validate_catalog(pattern_catalog)
    assert report.is_valid
    # CAPEC-NEW points at a parent outside the bundled subset.
    assert [n["code"] for n in report.notices] == ["external_parent"]
    assert report.notices[0]["subject"] == "CAPEC-NEW"

def test_lookup_pattern(pattern_catalog):
    pattern = capec.lookup_pattern(pattern_catalog, "CAPEC-542")
    assert pattern.name == "Targeted Malware"

def test_lookup_unknown_pattern_raises(pattern_catalog):
    with pytest.raises(NotFoundError) as excinfo:
        capec.lookup_pattern(pattern_catalog, "CAPEC-99999")
    assert excinfo.value.key == "CAPEC-99999"
    # Also a KeyError, for dict-style callers.
    assert isinstance(excinfo.value, KeyError)

def test_abstraction_is_case_insensitive(make_catalog_document):
    catalog = capec.load_catalog(make_catalog_document())
    assert catalog.patterns["CAPEC-542"].abstraction == AbstractionEnum.STANDARD

def test_duplicate_pattern_ids_raise(make_catalog_document):
    document = make_catalog_document({"id": "CAPEC-542", "name": "Again", "abstraction": "standard"})
    with pytest.raises(IntegrityError, match="CAPEC-542"):
        capec.load_catalog(document)

def test_malformed_json_reports_position():
    with pytest.raises(DocumentParseError, match="line 1, column"):
        capec.load_catalog('{"patterns": [')

def test_schema_error_names_field(make_catalog_document):
    document = make_catalog_document({"id": "CAPEC-1", "name": "Bad", "abstraction": "detailed"})
    with pytest.raises(DocumentParseError, match="abstraction"):
        capec.load_catalog(document)

def test_out_of_range_scores_load_but_fail_validation(make_catalog_document):
    document = make_catalog_document(
        {"id": "CAPEC-1", "name": "Bad scores", "abstraction": "meta", "likelihood_default": 6, "skill_required": 0},
    )
    catalog = capec.load_catalog(document)
    report = capec.validate_catalog(catalog)

    assert not report.is_valid
    assert sorted(e["message"].split(" ")[0] for e in report.errors) == ["likelihood_default", "skill_required"]
    assert {e["code"] for e in report.errors} == {"out_of_range"}

def test_self_parent_is_an_error(make_catalog_document):
    document = make_catalog_document({"id": "CAPEC-1", "name": "Loop", "abstraction": "meta", "parent_of": "CAPEC-1"})
    report = capec.validate_catalog(capec.load_catalog(document))
    assert [e["code"] for e in report.errors] == ["self_parent"]

def test_parent_alias_child_of(make_catalog_document):
    document = make_catalog_document({"id": "CAPEC-1", "name": "Child", "abstraction": "standard", "child_of": "CAPEC-542"})
    catalog = capec.load_catalog(document)
    assert catalog.patterns["CAPEC-1"].parent_of == "CAPEC-542"
    assert capec.validate_catalog(catalog).notices == []

def test_dump_then_load_is_identity(pattern_catalog):
    reloaded = capec.load_catalog(capec.dump_catalog(pattern_catalog))
    assert reloaded == pattern_catalog
    assert capec.dump_catalog(reloaded) == capec.dump_catalog(pattern_catalog)

def test_source_label_argument_wins(make_catalog_document):
    catalog = capec.load_catalog(make_catalog_document(), source_label="CAPEC v3.9 subset")
    assert catalog.source_label == "CAPEC v3.9 subset"
