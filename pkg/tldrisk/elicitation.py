import logging
from typing import Dict, List, Mapping, Optional, Sequence, TypeAlias
import numpy as np
import pandas as pd
from tldrisk import risk
from tldrisk.exceptions import CoverageError, EmptyPanelError, IntegrityError, ScoreRangeError
from tldrisk.helpers import Document, build_model, find_duplicates, parse_document
from tldrisk.models import (
    AttackCatalog,
    ConsensusVector,
    EstimateSet,
    Provenance,
    SubjectKindEnum,
)

logger = logging.getLogger(__name__)

PanelMatrix: TypeAlias = pd.DataFrame

def load_survey(document: Document) -> EstimateSet:
    """
    Loads one expert's survey answers.

    Args:
        document (str | dict): JSON text (or decoded object) with `expert`, `role`, `kind`,
            optional `aspect` (required for severity surveys) and `scores`.

    Returns:
        estimate_set (EstimateSet): The expert's scores, each in [0, 5].
    """
    data = parse_document(document, label="survey")
    return build_model(EstimateSet, data, label="survey")

def load_surveys(document: Document) -> List[EstimateSet]:
    """
    Loads a panel of surveys: a single survey object, an array of them, or an object with a `surveys` array.
    """
    data = parse_document(document, label="surveys")
    if isinstance(data, dict) and "surveys" in data:
        data = data["surveys"]
    if isinstance(data, dict):
        data = [data]
    return [load_survey(item) for item in data]

def load_consensus(document: Document) -> ConsensusVector:
    """
    Loads a published consensus vector, for panels whose per-expert scores are not available.
    """
    data = parse_document(document, label="consensus")
    vector = build_model(ConsensusVector, data, label="consensus")
    if not vector.normalized:
        out_of_range = sorted(k for k, v in vector.values.items() if not 0.0 <= v <= risk.LIKELIHOOD_SCALE_MAX)
        if out_of_range:
            raise ScoreRangeError(f"consensus scores outside [0, 5] for: {', '.join(out_of_range)}")
    logger.debug("Loaded %s consensus over %d subjects", vector.kind.value, len(vector.values))
    return vector

def generate_panel_matrix(sets: Sequence[EstimateSet]) -> PanelMatrix:
    """
    Generates a panel matrix from a list of estimate sets.

    Args:
        sets (Sequence[EstimateSet]): One estimate set per expert.

    Returns:
        panel_matrix (pd.DataFrame): A DataFrame with NaN values where:

            1. rows are experts,
            2. columns are subject ids (pattern or attack ids), and
            3. values are scores.
    """
    duplicates = find_duplicates(s.expert.id for s in sets)
    if duplicates:
        raise IntegrityError(f"expert(s) appear more than once in the panel: {', '.join(duplicates)}")

    records = [
        {"expert": s.expert.id, "subject": subject, "score": score}
        for s in sets
        for subject, score in s.scores.items()
    ]
    if not records:
        return pd.DataFrame(index=pd.Index([s.expert.id for s in sets], name="expert"), dtype=float)

    panel_matrix = pd.DataFrame.from_records(records).pivot(
        values="score",
        index="expert",
        columns="subject",
    )
    # Experts who scored nothing still get a row.
    panel_matrix = panel_matrix.reindex([s.expert.id for s in sets])
    return panel_matrix

def aggregate_panel_mean(
    sets: Sequence[EstimateSet],
    kind: SubjectKindEnum,
    aspect: Optional[str] = None,
    weights: Optional[Mapping[str, float]] = None,
) -> ConsensusVector:
    """
    Aggregates a panel of estimate sets into a per-subject consensus by arithmetic mean.

    Panels must be complete: an expert who skipped a subject is rejected
    rather than imputed.

    Args:
        sets (Sequence[EstimateSet]): One estimate set per expert, all of `kind`.
        kind (SubjectKindEnum): Subject kind every set must share.
        aspect (str): For severity panels, the aspect every set must share.
        weights (Mapping[str, float]): Optional per-expert weights, normalized here. (Default: uniform)

    Returns:
        consensus (ConsensusVector): Per-subject mean on the elicitation scale.
    """
    sets = list(sets)
    if len(sets) == 0:
        raise EmptyPanelError(f"cannot aggregate an empty {SubjectKindEnum(kind).value} panel")

    kind = SubjectKindEnum(kind)
    is_severity = kind == SubjectKindEnum.SEVERITY_MAGNITUDE
    if not is_severity:
        aspect = None
    elif aspect is None:
        aspect = sets[0].aspect
    mismatched = sorted(
        s.expert.id for s in sets
        if s.kind != kind or (is_severity and s.aspect != aspect)
    )
    if mismatched:
        raise IntegrityError(f"estimate sets of another kind or aspect in a {kind.value} panel: {', '.join(mismatched)}")

    panel_matrix = generate_panel_matrix(sets)
    gaps = panel_matrix.isna()
    if gaps.to_numpy().any():
        missing = {
            expert: sorted(panel_matrix.columns[row].tolist())
            for expert, row in zip(panel_matrix.index, gaps.to_numpy())
            if row.any()
        }
        detail = "; ".join(f"{expert} is missing {', '.join(subjects)}" for expert, subjects in missing.items())
        raise CoverageError(
            f"panel does not cover the same subjects: {detail}",
            missing=sorted({s for subjects in missing.values() for s in subjects}),
        )

    if weights is None:
        values = panel_matrix.mean(axis="rows")
        aggregation = "mean"
    else:
        unknown = set(weights) ^ set(panel_matrix.index)
        if unknown:
            raise CoverageError(f"weights must name exactly the panel's experts: {sorted(unknown)}", missing=unknown)
        w = np.array([weights[expert] for expert in panel_matrix.index], dtype=float)
        if (w < 0).any() or w.sum() <= 0:
            raise ScoreRangeError("expert weights must be nonnegative and not all zero")
        values = pd.Series(
            np.average(panel_matrix.to_numpy(), axis=0, weights=w),
            index=panel_matrix.columns,
        )
        aggregation = "weighted_mean"

    return ConsensusVector(
        kind=kind,
        aspect=aspect,
        values={str(subject): float(value) for subject, value in values.items()},
        provenance=Provenance(panel_size=len(sets), aggregation=aggregation, raw="available"),
    )

def build_mecble(
    capec_consensus: ConsensusVector,
    attacks: AttackCatalog,
    aggregation: risk.Aggregation = risk.DEFAULT_AGGREGATION,
) -> ConsensusVector:
    """
    Builds the mean of the experts' CAPEC-based likelihood estimates (MECBLE), per attack.

    Args:
        capec_consensus (ConsensusVector): Pattern likelihood consensus on the 0..5 scale.
        attacks (AttackCatalog): Attacks and their pattern mappings.
        aggregation ("mean" | "max"): How mapped pattern scores combine. (Default: mean)

    Returns:
        mecble (ConsensusVector): Per-attack likelihoods on [0, 1], comparable with `build_medle`.
    """
    values = {
        attack.id: risk.capec_based_likelihood(attack, capec_consensus, aggregation=aggregation)
        for attack in attacks.attacks.values()
    }
    return ConsensusVector(
        kind=SubjectKindEnum.DIRECT_ATTACK_LIKELIHOOD,
        values=values,
        normalized=True,
        provenance=capec_consensus.provenance,
        source_label="capec-based",
    )

def build_medle(direct_sets: Sequence[EstimateSet], weights: Optional[Mapping[str, float]] = None) -> ConsensusVector:
    """
    Builds the mean of the experts' direct likelihood estimates (MEDLE), per attack.

    Values are divided by the same scale maximum as the CAPEC-based vector;
    the 0..5 means stay in `provenance.raw_values`.

    Args:
        direct_sets (Sequence[EstimateSet]): Direct attack likelihood surveys.
        weights (Mapping[str, float]): Optional per-expert weights. (Default: uniform)

    Returns:
        medle (ConsensusVector): Per-attack likelihoods on [0, 1].
    """
    raw = aggregate_panel_mean(direct_sets, SubjectKindEnum.DIRECT_ATTACK_LIKELIHOOD, weights=weights)
    values: Dict[str, float] = {
        attack_id: value / risk.LIKELIHOOD_SCALE_MAX for attack_id, value in raw.values.items()
    }
    return ConsensusVector(
        kind=SubjectKindEnum.DIRECT_ATTACK_LIKELIHOOD,
        values=values,
        normalized=True,
        provenance=raw.provenance.model_copy(update={"raw_values": dict(raw.values)}),
        source_label="direct",
    )
