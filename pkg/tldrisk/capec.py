import logging
from tldrisk.exceptions import NotFoundError
from tldrisk.helpers import Document, build_model, check_unique_ids, dump_document, parse_document, require_key
from tldrisk.models import AttackPattern, PatternCatalog, ValidationReport

logger = logging.getLogger(__name__)

SCORE_RANGE = (1, 5)
SKILL_RANGE = (1, 3)

def load_catalog(document: Document, source_label: str = "") -> PatternCatalog:
    """
    Loads a pattern-catalog document.

    Scores outside their ranges still load; `validate_catalog` reports them.

    Args:
        document (str | dict): JSON text (or decoded object) with a top-level `patterns` array.
        source_label (str): Provenance string stored on the catalog. Falls back to the
            document's own `source_label` field.

    Returns:
        catalog (PatternCatalog): Catalog of every record, keyed by pattern id.
    """
    data = parse_document(document, label="pattern catalog")
    records = require_key(data, "patterns", label="pattern catalog")
    check_unique_ids(records, label="pattern catalog")

    catalog = build_model(
        PatternCatalog,
        {
            "patterns": records,
            "source_label": source_label or data.get("source_label", ""),
        },
        label="pattern catalog",
    )
    logger.debug("Loaded %d attack patterns", len(catalog.patterns))
    return catalog

def dump_catalog(catalog: PatternCatalog) -> str:
    """Serializes a catalog back to its document form. Reloading it gives an equal catalog."""
    return dump_document(catalog)

def lookup_pattern(catalog: PatternCatalog, pattern_id: str) -> AttackPattern:
    """
    Args:
        catalog (PatternCatalog): Catalog to search.
        pattern_id (str): Pattern id, e.g. `CAPEC-542`.

    Returns:
        pattern (AttackPattern): The matching record.
    """
    try:
        return catalog.patterns[pattern_id]
    except KeyError:
        raise NotFoundError(f"unknown attack pattern: {pattern_id}", key=pattern_id) from None

def _check_range(report: ValidationReport, pattern: AttackPattern, field: str, bounds) -> None:
    value = getattr(pattern, field)
    low, high = bounds
    if value is not None and not (low <= value <= high):
        report.add_error(
            "out_of_range",
            f"{field} = {value} is outside [{low}, {high}]",
            subject=pattern.id,
        )

def validate_catalog(catalog: PatternCatalog) -> ValidationReport:
    """
    Checks every catalog invariant and reports violations instead of raising.

    A `parent_of` that names a pattern outside the catalog is a notice, since
    a catalog is usually a subset of a much larger ontology.

    Args:
        catalog (PatternCatalog): Catalog to check.

    Returns:
        report (ValidationReport): Empty `errors` iff the catalog is valid.
    """
    report = ValidationReport()
    for key, pattern in catalog.patterns.items():
        if key != pattern.id:
            report.add_error("id_mismatch", f"catalog key {key} holds pattern {pattern.id}", subject=key)
        _check_range(report, pattern, "severity_default", SCORE_RANGE)
        _check_range(report, pattern, "likelihood_default", SCORE_RANGE)
        _check_range(report, pattern, "skill_required", SKILL_RANGE)

        if pattern.parent_of is None:
            continue
        if pattern.parent_of == pattern.id:
            report.add_error("self_parent", "pattern names itself as parent", subject=pattern.id)
        elif pattern.parent_of not in catalog.patterns:
            report.add_notice(
                "external_parent",
                f"parent {pattern.parent_of} is not in this catalog",
                subject=pattern.id,
            )

    return report
