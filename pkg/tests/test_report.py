import io
import json
import pandas as pd
import pytest
from decimal import Decimal
from tldrisk import report
from tldrisk.exceptions import CoverageError, IntegrityError, TldrError
from tldrisk.models import AssessmentRow, AttackCatalog
from tests.fixtures import (
    attack_catalog,
    bundled_loader,
    capec_consensus,
    severity_consensus,
    severity_model,
)

GROUP_ORDER = [
    "A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11",
    "A12", "A13", "A14", "A15", "A16", "A17", "A18",
    "A19", "A20", "A21", "A22",
    "A23",
]

GLOBAL_ORDER = [
    "A1", "A2", "A3", "A4", "A12", "A13", "A14", "A19", "A15", "A16", "A5", "A6",
    "A17", "A20", "A7", "A8", "A23", "A21", "A9", "A10", "A18", "A22", "A11",
]

@pytest.fixture()
def bundled_rows(bundled_loader):
    return bundled_loader.assess()

@pytest.fixture()
def make_report(bundled_rows, attack_catalog, capec_consensus, severity_consensus, severity_model):
    def make(sort="group", reproducible=True, rows=None, attacks=None):
        metadata = report.build_metadata(
            calibration=-0.13,
            severity_model=severity_model,
            capec_consensus=capec_consensus,
            severity_consensus=severity_consensus,
            reproducible=reproducible,
        )
        return report.build_report(
            bundled_rows if rows is None else rows,
            attack_catalog if attacks is None else attacks,
            metadata,
            sort=sort,
        )

    return make

def test_csv_layout(make_report):
    text = report.render_report(make_report(), "csv")
    lines = text.split("\n")

    assert text.endswith("\n")
    assert len(lines) == 25  # header, 23 rows and the trailing empty split
    assert lines[0] == "attack_id,name,device,capecs,severity,likelihood,likelihood_shifted,risk,rank"
    assert lines[1] == "A1,Ransomware,GenericMID,CAPEC-542,4.750,0.900,0.770,3.658,1"

def test_empty_report_is_header_only(make_report):
    doc = make_report(rows=[], attacks=AttackCatalog())
    assert report.render_report(doc, "csv") == \
        "attack_id,name,device,capecs,severity,likelihood,likelihood_shifted,risk,rank\n"

def test_rendering_is_deterministic(make_report):
    for format in ["csv", "markdown", "json-lines"]:
        assert report.render_report(make_report(), format) == report.render_report(make_report(), format)

def test_group_order(make_report):
    assert [row.attack_id for row in make_report().rows] == GROUP_ORDER

def test_global_order(make_report):
    doc = make_report(sort="global")
    assert [row.attack_id for row in doc.rows] == GLOBAL_ORDER
    assert [row.rank for row in doc.rows] == list(range(1, 24))

def test_unranked_rows_are_ranked(make_report, bundled_rows):
    unranked = [row.model_copy(update={"rank": None}) for row in bundled_rows]
    assert make_report(rows=unranked, sort="global").rows == make_report(sort="global").rows

def test_csv_reads_back(make_report):
    df = pd.read_csv(io.StringIO(report.render_report(make_report(), "csv")))
    assert list(df.columns) == report.CSV_COLUMNS
    assert df["rank"].tolist()[:3] == [1, 2, 3]
    assert set(df["device"]) == {"GenericMID", "GenericCT", "GenericMRI", "GenericUltrasound"}
    assert df.loc[df["attack_id"] == "A19", "risk"].item() == pytest.approx(2.352)

def test_markdown_without_timestamp(make_report):
    text = report.render_report(make_report(), "markdown")
    assert text.startswith("# Risk assessment\n")
    assert "- Likelihood shift: -0.13 (fixed)" in text
    assert "Generated" not in text
    assert "| 1 | A1 | Ransomware | GenericMID | CAPEC-542 | 4.750 | 0.900 | 0.770 | 3.658 |" in text

def test_markdown_with_timestamp(make_report):
    doc = make_report(reproducible=False)
    assert doc.metadata["timestamp"] is not None
    assert f"- Generated: {doc.metadata['timestamp']}" in report.render_report(doc, "markdown")

def test_json_lines(make_report):
    records = [json.loads(line) for line in report.render_report(make_report(), "json-lines").splitlines()]
    assert len(records) == 23
    assert records[0] == {
        "attack_id": "A1",
        "name": "Ransomware",
        "device": "GenericMID",
        "capecs": ["CAPEC-542"],
        "severity": 4.75,
        "likelihood": 0.9,
        "likelihood_shifted": 0.77,
        "risk": 3.658,
        "rank": 1,
    }

def test_round_half_up():
    assert report.round_half_up(0.77 * 4.75) == Decimal("3.658")
    assert report.round_half_up(0.0005) == Decimal("0.001")
    assert report.round_half_up(2.0) == Decimal("2.000")

def test_unknown_format_raises(make_report):
    with pytest.raises(TldrError, match="pdf"):
        report.render_report(make_report(), "pdf")

def test_rows_must_match_the_catalog(make_report, bundled_rows):
    with pytest.raises(CoverageError) as excinfo:
        make_report(rows=bundled_rows[1:])
    assert excinfo.value.missing == [bundled_rows[0].attack_id]

    with pytest.raises(IntegrityError):
        make_report(rows=[*bundled_rows, bundled_rows[0]])

def test_metadata(make_report):
    metadata = make_report().metadata
    assert metadata["shift"] == -0.13
    assert metadata["aggregation"] == "mean"
    assert metadata["severity_aspects"] == ["overall"]
    assert metadata["likelihood_panel"]["panel_size"] == 4
    assert metadata["timestamp"] is None

def test_rows_without_names_render():
    rows = [AssessmentRow(attack_id="A1", likelihood=0.5, likelihood_shifted=0.5, severity=1.0, risk=0.5, rank=1)]
    catalog = AttackCatalog(attacks=[
        {"id": "A1", "name": "x", "device": "Other", "novelty": "new", "capec_refs": ["CAPEC-1"]},
    ])
    metadata = {
        "shift": 0.0, "shift_source": "fixed", "aggregation": "mean", "severity_aspects": ["overall"],
        "severity_shift": 0.0, "likelihood_panel": {"panel_size": 0, "aggregation": "", "raw": "unavailable"},
        "severity_panel": {"panel_size": 0, "aggregation": "", "raw": "unavailable"}, "timestamp": None,
    }
    text = report.render_report(report.build_report(rows, catalog, metadata), "csv")
    assert text.splitlines()[1] == "A1,,Other,,1.000,0.500,0.500,0.500,1"
