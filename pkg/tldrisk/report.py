import json
import logging
from datetime import datetime, timezone
from decimal import Decimal, ROUND_HALF_UP
from typing import Iterable, List, Optional, Union
import pandas as pd
from pydantic import BaseModel, ConfigDict
from tldrisk.exceptions import CoverageError, IntegrityError, TldrError
from tldrisk.helpers import find_duplicates
from tldrisk.models import (
    AssessmentRow,
    AttackCatalog,
    ConsensusVector,
    SeverityModel,
    ShiftCalibration,
)
from tldrisk.risk import DEFAULT_AGGREGATION, prioritize
from tldrisk.types.tldr import PanelProvenance, ReportFormatEnum, ReportMetadata, ReportSortEnum

logger = logging.getLogger(__name__)

DISPLAY_DECIMALS = 3
CSV_COLUMNS = [
    "attack_id",
    "name",
    "device",
    "capecs",
    "severity",
    "likelihood",
    "likelihood_shifted",
    "risk",
    "rank",
]
NUMERIC_COLUMNS = ["severity", "likelihood", "likelihood_shifted", "risk"]

class ReportDocument(BaseModel):
    """
    Rows in presentation order plus the run's metadata.

    With the default `group` sort, rows are grouped by device class in catalog
    order and sorted by descending risk inside each group; `rank` always holds
    the global rank.
    """
    model_config = ConfigDict(frozen=True)

    rows: List[AssessmentRow] = []
    metadata: ReportMetadata

def _panel(vector: Optional[ConsensusVector]) -> PanelProvenance:
    if vector is None:
        return {"panel_size": 0, "aggregation": "", "raw": "unavailable"}
    provenance = vector.provenance
    return {
        "panel_size": provenance.panel_size,
        "aggregation": provenance.aggregation,
        "raw": provenance.raw,
    }

def build_metadata(
    calibration: Union[ShiftCalibration, float],
    severity_model: SeverityModel,
    capec_consensus: Optional[ConsensusVector] = None,
    severity_consensus: Iterable[ConsensusVector] = (),
    aggregation: str = DEFAULT_AGGREGATION,
    reproducible: bool = False,
) -> ReportMetadata:
    """
    Collects what a report needs to say about how its numbers were produced.

    Args:
        calibration (ShiftCalibration | float): Likelihood shift used for every row.
        severity_model (SeverityModel): Severity aspects and shift.
        capec_consensus (ConsensusVector): Pattern likelihood consensus, for its panel provenance.
        severity_consensus (Iterable[ConsensusVector]): Severity consensus vectors; the first one's
            panel is reported.
        aggregation (str): Pattern aggregation mode.
        reproducible (bool): Leave out the timestamp, so reruns give identical output.

    Returns:
        metadata (ReportMetadata): The report metadata.
    """
    if not isinstance(calibration, ShiftCalibration):
        calibration = ShiftCalibration(c_like=calibration)
    severity_consensus = list(severity_consensus)
    timestamp = None if reproducible else datetime.now(timezone.utc).isoformat(timespec="seconds")

    return {
        "shift": calibration.c_like,
        "shift_source": calibration.source.value,
        "aggregation": aggregation,
        "severity_aspects": [aspect.id for aspect in severity_model.aspects],
        "severity_shift": severity_model.shift,
        "likelihood_panel": _panel(capec_consensus),
        "severity_panel": _panel(severity_consensus[0] if severity_consensus else None),
        "timestamp": timestamp,
    }

def _group_key(device_order: List[str]):
    positions = {device: index for index, device in enumerate(device_order)}
    def key(row: AssessmentRow):
        return (positions.get(row.device, len(positions)), -row.risk, -row.severity, row.attack_id)
    return key

def build_report(
    rows: Iterable[AssessmentRow],
    attacks: AttackCatalog,
    metadata: ReportMetadata,
    sort: Union[ReportSortEnum, str] = ReportSortEnum.GROUP,
) -> ReportDocument:
    """
    Arranges assessed rows into a report.

    Every catalog attack must appear exactly once. Rows without a rank are
    ranked globally first.

    Args:
        rows (Iterable[AssessmentRow]): Assessed rows.
        attacks (AttackCatalog): The catalog the rows were assessed from; fixes the device group order.
        metadata (ReportMetadata): Run metadata, see `build_metadata`.
        sort (ReportSortEnum): `group` (the default) or `global`.

    Returns:
        document (ReportDocument): The report.
    """
    rows = list(rows)
    duplicates = find_duplicates(row.attack_id for row in rows)
    if duplicates:
        raise IntegrityError(f"attack(s) appear more than once in the report: {', '.join(duplicates)}")
    row_ids = {row.attack_id for row in rows}
    missing = set(attacks.attacks) - row_ids
    extra = row_ids - set(attacks.attacks)
    if missing or extra:
        raise CoverageError(
            f"report rows do not match the attack catalog (missing: {sorted(missing)}, extra: {sorted(extra)})",
            missing=missing,
            extra=extra,
        )

    if any(row.rank is None for row in rows):
        rows = prioritize(rows)

    sort = ReportSortEnum(sort)
    if sort == ReportSortEnum.GROUP:
        ordered = sorted(rows, key=_group_key(attacks.device_order))
    else:
        ordered = sorted(rows, key=lambda row: row.rank)

    return ReportDocument(rows=ordered, metadata=metadata)

def round_half_up(value: float, decimals: int = DISPLAY_DECIMALS) -> Decimal:
    """
    Rounds half away from zero, on the decimal value the float was meant to hold.

    Binary noise is dropped first, so 0.77 * 4.75 (3.6575) rounds to 3.658.
    """
    cleaned = Decimal(repr(round(value, 9)))
    return cleaned.quantize(Decimal(1).scaleb(-decimals), rounding=ROUND_HALF_UP)

def _row_record(row: AssessmentRow) -> dict:
    record = {
        "attack_id": row.attack_id,
        "name": row.name,
        "device": row.device,
        "capecs": ";".join(sorted(row.capec_refs)),
    }
    for column in NUMERIC_COLUMNS:
        record[column] = round_half_up(getattr(row, column))
    record["rank"] = row.rank
    return record

def _render_csv(doc: ReportDocument) -> str:
    df = pd.DataFrame([_row_record(row) for row in doc.rows], columns=CSV_COLUMNS)
    for column in NUMERIC_COLUMNS:
        df[column] = df[column].map(str)
    df["rank"] = df["rank"].map(lambda rank: "" if pd.isna(rank) else str(int(rank)))
    return df.to_csv(index=False, lineterminator="\n")

def _render_markdown(doc: ReportDocument) -> str:
    meta = doc.metadata
    likelihood_panel = meta["likelihood_panel"]
    severity_panel = meta["severity_panel"]
    lines = [
        "# Risk assessment",
        "",
        f"- Likelihood shift: {meta['shift']:g} ({meta['shift_source']})",
        f"- Pattern aggregation: {meta['aggregation']}",
        f"- Severity aspects: {', '.join(meta['severity_aspects'])} (shift {meta['severity_shift']:g})",
        f"- Likelihood panel: {likelihood_panel['panel_size']} experts, "
        f"{likelihood_panel['aggregation']}, raw scores {likelihood_panel['raw']}",
        f"- Severity panel: {severity_panel['panel_size']} experts, "
        f"{severity_panel['aggregation']}, raw scores {severity_panel['raw']}",
    ]
    if meta.get("timestamp"):
        lines.append(f"- Generated: {meta['timestamp']}")

    lines += [
        "",
        "| Rank | Attack | Name | Device | CAPECs | Severity | Likelihood | Shifted likelihood | Risk |",
        "|---:|---|---|---|---|---:|---:|---:|---:|",
    ]
    for row in doc.rows:
        record = _row_record(row)
        cells = [
            "" if record["rank"] is None else str(record["rank"]),
            record["attack_id"],
            record["name"].replace("|", "\\|"),
            record["device"],
            ", ".join(sorted(row.capec_refs)),
            *(str(record[column]) for column in NUMERIC_COLUMNS),
        ]
        lines.append("| " + " | ".join(cells) + " |")

    return "\n".join(lines) + "\n"

def _render_json_lines(doc: ReportDocument) -> str:
    lines = []
    for row in doc.rows:
        record = _row_record(row)
        for column in NUMERIC_COLUMNS:
            record[column] = float(record[column])
        record["capecs"] = sorted(row.capec_refs)
        lines.append(json.dumps(record, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)

def render_report(doc: ReportDocument, format: Union[ReportFormatEnum, str] = ReportFormatEnum.CSV) -> str:
    """
    Renders a report as text. The output is a pure function of the document.

    Args:
        doc (ReportDocument): The report.
        format (ReportFormatEnum): `csv`, `markdown` or `json-lines`. (Default: csv)

    Returns:
        text (str): The rendered report. Numbers are rounded half-up to 3 decimals.
    """
    try:
        format = ReportFormatEnum(format)
    except ValueError:
        raise TldrError(f"unknown report format: {format}") from None

    if format == ReportFormatEnum.CSV:
        return _render_csv(doc)
    if format == ReportFormatEnum.MARKDOWN:
        return _render_markdown(doc)
    return _render_json_lines(doc)
