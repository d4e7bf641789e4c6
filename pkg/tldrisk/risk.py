import logging
from typing import Dict, Iterable, List, Literal, Mapping, Union
import numpy as np
from tldrisk.exceptions import CoverageError, ScoreRangeError, TldrError
from tldrisk.helpers import Document, build_model, parse_document
from tldrisk.models import (
    Attack,
    AttackCatalog,
    AssessmentRow,
    ConsensusVector,
    SeverityModel,
    ShiftCalibration,
    ShiftSourceEnum,
    SubjectKindEnum,
)
from tldrisk.types.tldr import AssessmentOptions

logger = logging.getLogger(__name__)

# Elicited scores live on 0..5; likelihoods live on [0, 1].
LIKELIHOOD_SCALE_MAX = 5.0
SEVERITY_SCALE_MAX = 5.0
_SCALE_SLACK = 1e-9
DEFAULT_LIKELIHOOD_SHIFT = -0.13
DEFAULT_AGGREGATION = "mean"

Aggregation = Literal["mean", "max"]

def capec_based_likelihood(
    attack: Attack,
    consensus: ConsensusVector,
    aggregation: Aggregation = DEFAULT_AGGREGATION,
) -> float:
    """
    Computes an attack's likelihood from the consensus scores of the patterns it maps into.

    By default every mapped pattern is treated as equally likely to be the one
    used, giving the mean score. `max` gives the worst case instead. The result
    is divided by the top of the 0..5 scale.

    Args:
        attack (Attack): The attack, with its pattern mapping.
        consensus (ConsensusVector): Pattern likelihood consensus on the 0..5 scale.
        aggregation ("mean" | "max"): How mapped pattern scores combine. (Default: mean)

    Returns:
        likelihood (float): A value in [0, 1].
    """
    missing = sorted(ref for ref in attack.capec_refs if ref not in consensus.values)
    if missing:
        raise CoverageError(
            f"attack {attack.id}: no consensus score for pattern(s) {', '.join(missing)}",
            missing=missing,
        )

    scores = np.array([consensus.values[ref] for ref in sorted(attack.capec_refs)], dtype=float)
    if ((scores < 0) | (scores > LIKELIHOOD_SCALE_MAX)).any():
        raise ScoreRangeError(f"attack {attack.id}: pattern scores must lie in [0, {LIKELIHOOD_SCALE_MAX:g}]")

    if aggregation == "mean":
        combined = scores.mean()
    elif aggregation == "max":
        combined = scores.max()
    else:
        raise TldrError(f"unknown aggregation: {aggregation}")

    return float(combined / LIKELIHOOD_SCALE_MAX)

def _check_same_domain(a: Mapping[str, float], b: Mapping[str, float]) -> None:
    missing = set(a) - set(b)
    extra = set(b) - set(a)
    if missing or extra:
        raise CoverageError(
            "likelihood vectors cover different attacks "
            f"(missing: {sorted(missing)}, extra: {sorted(extra)})",
            missing=missing,
            extra=extra,
        )
    if not a:
        raise CoverageError("cannot calibrate a shift over an empty set of attacks")

def calibrate_shift(capec_based: ConsensusVector, direct: ConsensusVector) -> ShiftCalibration:
    """
    Finds the additive shift that makes the CAPEC-based likelihoods average to the direct ones.

    Args:
        capec_based (ConsensusVector): Per-attack CAPEC-based likelihoods, normalized.
        direct (ConsensusVector): Per-attack direct likelihood consensus, normalized.

    Returns:
        calibration (ShiftCalibration): `c_like = -(mean(capec_based) - mean(direct))`.
    """
    _check_same_domain(capec_based.values, direct.values)
    if capec_based.normalized != direct.normalized:
        raise TldrError("cannot calibrate between a normalized and an unnormalized vector")

    attack_ids = sorted(capec_based.values)
    capec_mean = np.mean([capec_based.values[k] for k in attack_ids])
    direct_mean = np.mean([direct.values[k] for k in attack_ids])
    c_like = -float(capec_mean - direct_mean)
    logger.debug("Calibrated likelihood shift %.6f over %d attacks", c_like, len(attack_ids))

    return ShiftCalibration(c_like=c_like, source=ShiftSourceEnum.CALIBRATED_AGAINST_DIRECT)

def apply_shift(likelihood: float, calib: Union[ShiftCalibration, float]) -> float:
    """
    Adds the likelihood shift, clamping the result into [0, 1].

    Clamping is logged as a warning.

    Args:
        likelihood (float): Unshifted likelihood in [0, 1].
        calib (ShiftCalibration | float): The shift, or a bare `c_like` value.

    Returns:
        shifted (float): Shifted likelihood in [0, 1].
    """
    c_like = calib.c_like if isinstance(calib, ShiftCalibration) else float(calib)
    shifted = likelihood + c_like
    clamped = min(max(shifted, 0.0), 1.0)
    if clamped != shifted:
        logger.warning(
            "Shifted likelihood %.6f (%.6f %+.6f) clamped to %.1f",
            shifted, likelihood, c_like, clamped,
        )
    return clamped

def composite_severity(model: SeverityModel, magnitudes: Mapping[str, float]) -> float:
    """
    Combines per-aspect impact magnitudes into one severity: `sum(w_i * s_i) + shift`.

    Args:
        model (SeverityModel): Aspects with normalized weights, and the constant shift.
        magnitudes (Mapping[str, float]): Magnitude per aspect id, on the 0..5 scale.

    Returns:
        severity (float): Composite severity in [0, 5]. Results further out raise ScoreRangeError.
    """
    weights = model.weights
    missing = set(weights) - set(magnitudes)
    extra = set(magnitudes) - set(weights)
    if missing or extra:
        raise CoverageError(
            f"severity aspects do not match the model (missing: {sorted(missing)}, extra: {sorted(extra)})",
            missing=missing,
            extra=extra,
        )
    negative = sorted(aspect for aspect, value in magnitudes.items() if value < 0)
    if negative:
        raise ScoreRangeError(f"negative severity magnitude for aspect(s): {', '.join(negative)}")

    severity = float(sum(weights[a.id] * magnitudes[a.id] for a in model.aspects) + model.shift)
    if not -_SCALE_SLACK <= severity <= SEVERITY_SCALE_MAX + _SCALE_SLACK:
        raise ScoreRangeError(
            f"composite severity {severity:g} falls outside [0, {SEVERITY_SCALE_MAX:g}] "
            f"(severity model shift {model.shift:g})"
        )
    # Weight normalization can leave a last-bit overshoot.
    return min(max(severity, 0.0), SEVERITY_SCALE_MAX)

def integrate_risk(likelihood_shifted: float, severity: float) -> float:
    """Risk = Likelihood x Severity, on unrounded inputs."""
    return likelihood_shifted * severity

def _priority_key(row: AssessmentRow):
    return (-row.risk, -row.severity, row.attack_id)

def prioritize(rows: Iterable[AssessmentRow]) -> List[AssessmentRow]:
    """
    Orders rows by descending risk and assigns ranks 1..N.

    Ties go to the higher severity, then to the lexicographically smaller attack id.

    Args:
        rows (Iterable[AssessmentRow]): Unranked (or previously ranked) rows.

    Returns:
        ranked (List[AssessmentRow]): New rows, rank 1 being the largest risk.
    """
    ordered = sorted(rows, key=_priority_key)
    return [row.model_copy(update={"rank": rank}) for rank, row in enumerate(ordered, start=1)]

def load_severity_model(document: Document) -> SeverityModel:
    """
    Loads a severity-model document: an `aspects` array of `{id, weight}` and an optional `shift`.
    """
    data = parse_document(document, label="severity model")
    return build_model(SeverityModel, data, label="severity model")

DEFAULT_SEVERITY_MODEL = SeverityModel(aspects=[{"id": "overall", "weight": 1.0}], shift=0.0)

def _severity_magnitudes(
    attack_id: str,
    model: SeverityModel,
    severities: Mapping[str, ConsensusVector],
) -> Dict[str, float]:
    magnitudes = {}
    for aspect in model.aspects:
        vector = severities.get(aspect.id)
        if vector is None:
            raise CoverageError(f"no severity consensus for aspect {aspect.id}", missing=[aspect.id])
        if attack_id not in vector.values:
            raise CoverageError(
                f"severity consensus for aspect {aspect.id} has no score for attack {attack_id}",
                missing=[attack_id],
            )
        magnitudes[aspect.id] = vector.values[attack_id]
    return magnitudes

def run_assessment(
    attacks: AttackCatalog,
    capec_consensus: ConsensusVector,
    severity_consensus: Iterable[ConsensusVector],
    severity_model: SeverityModel = DEFAULT_SEVERITY_MODEL,
    options: AssessmentOptions = {},
) -> List[AssessmentRow]:
    """
    Runs likelihood, shift, composite severity and risk integration for every attack.

    This does the following:

    1. computes each attack's CAPEC-based likelihood from the pattern consensus,
    2. applies the likelihood shift (clamping into [0, 1]),
    3. combines the per-aspect severity consensus into a composite severity,
    4. integrates risk as shifted likelihood times severity, and
    5. ranks all attacks globally by risk.

    Args:
        attacks (AttackCatalog): Attacks and their pattern mappings.
        capec_consensus (ConsensusVector): Pattern likelihood consensus on the 0..5 scale.
        severity_consensus (Iterable[ConsensusVector]): One severity consensus per model aspect.
        severity_model (SeverityModel): Aspect weights and severity shift. (Default: single "overall" aspect)
        options (AssessmentOptions): Configuration options for override defaults.

    Returns:
        rows (List[AssessmentRow]): Ranked rows, one per attack.
    """
    if capec_consensus.kind != SubjectKindEnum.CAPEC_LIKELIHOOD:
        raise TldrError(f"expected a pattern likelihood consensus, got {capec_consensus.kind.value}")
    aggregation = options.get("aggregation", DEFAULT_AGGREGATION)
    shift = options.get("shift", DEFAULT_LIKELIHOOD_SHIFT)
    calibration = shift if isinstance(shift, ShiftCalibration) else ShiftCalibration(c_like=shift)
    severities = {vector.aspect: vector for vector in severity_consensus}

    rows = []
    for attack in attacks.attacks.values():
        likelihood = capec_based_likelihood(attack, capec_consensus, aggregation=aggregation)
        likelihood_shifted = apply_shift(likelihood, calibration)
        severity = composite_severity(
            severity_model,
            _severity_magnitudes(attack.id, severity_model, severities),
        )
        rows.append(AssessmentRow(
            attack_id=attack.id,
            name=attack.name,
            device=attack.device,
            capec_refs=attack.capec_refs,
            likelihood=likelihood,
            likelihood_shifted=likelihood_shifted,
            severity=severity,
            risk=integrate_risk(likelihood_shifted, severity),
        ))

    return prioritize(rows)
