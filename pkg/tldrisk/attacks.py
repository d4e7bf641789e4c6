import logging
from typing import Dict, Tuple
from tldrisk.exceptions import IntegrityError
from tldrisk.helpers import Document, build_model, check_unique_ids, dump_document, parse_document, require_key
from tldrisk.models import AttackCatalog, NoveltyEnum, PatternCatalog, ValidationReport

logger = logging.getLogger(__name__)

def load_attacks(document: Document, source_label: str = "") -> AttackCatalog:
    """
    Loads an attack-catalog document.

    Args:
        document (str | dict): JSON text (or decoded object) with a top-level `attacks` array.
        source_label (str): Provenance string stored on the catalog.

    Returns:
        catalog (AttackCatalog): Attacks keyed by id, in document order.
    """
    data = parse_document(document, label="attack catalog")
    records = require_key(data, "attacks", label="attack catalog")
    check_unique_ids(records, label="attack catalog")

    catalog = build_model(
        AttackCatalog,
        {
            "attacks": records,
            "source_label": source_label or data.get("source_label", ""),
        },
        label="attack catalog",
    )
    # Every attack is mapped into at least one pattern.
    unmapped = [a.id for a in catalog.attacks.values() if not a.capec_refs]
    if unmapped:
        raise IntegrityError(f"attack catalog: attack(s) with no pattern mapping: {', '.join(unmapped)}")

    logger.debug("Loaded %d attacks", len(catalog.attacks))
    return catalog

def dump_attacks(catalog: AttackCatalog) -> str:
    return dump_document(catalog)

def validate_mappings(attacks: AttackCatalog, patterns: PatternCatalog) -> ValidationReport:
    """
    Reports every pattern id an attack maps into that the pattern catalog lacks.

    Args:
        attacks (AttackCatalog): Attacks to check.
        patterns (PatternCatalog): Catalog the mappings must resolve against.

    Returns:
        report (ValidationReport): One error per unresolved (attack, pattern id) pair.
    """
    report = ValidationReport()
    for attack in attacks.attacks.values():
        for pattern_id in sorted(attack.capec_refs):
            if pattern_id not in patterns.patterns:
                report.add_error(
                    "unresolved_pattern",
                    f"maps into unknown pattern {pattern_id}",
                    subject=attack.id,
                )
    return report

def compression_stats(attacks: AttackCatalog) -> Tuple[int, int, float]:
    """
    Measures how far the attack-to-pattern mapping compresses the attack set.

    Args:
        attacks (AttackCatalog): The attack catalog.

    Returns:
        stats (Tuple[int, int, float]): Attack count, number of distinct patterns mapped into,
            and mean mappings per attack (0.0 for an empty catalog).
    """
    attack_count = len(attacks.attacks)
    distinct = set().union(*(a.capec_refs for a in attacks.attacks.values()))
    total_mappings = sum(len(a.capec_refs) for a in attacks.attacks.values())
    mean = total_mappings / attack_count if attack_count else 0.0

    return attack_count, len(distinct), mean

def novelty_counts(attacks: AttackCatalog) -> Dict[str, int]:
    """Counts attacks per novelty, e.g. `{"known": 15, "new": 8}`."""
    counts = {novelty.value: 0 for novelty in NoveltyEnum}
    for attack in attacks.attacks.values():
        counts[attack.novelty.value] += 1
    return counts
