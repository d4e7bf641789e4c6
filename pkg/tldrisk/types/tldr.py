from typing import List, Literal, Optional
# pydantic needs the typing_extensions flavour to validate TypedDicts before 3.12.
from typing_extensions import TypedDict
from enum import Enum


class StatMethodEnum(str, Enum):
    SPEARMAN_T_APPROX = "spearman_t_approx"
    SPEARMAN_EXACT = "spearman_exact"
    PAIRED_T = "paired_t"

class StatResult(TypedDict):
    """
    Attributes:
        statistic (float): Spearman's rho, or Student's t.
        p_value (float): Two-sided p-value in [0, 1].
        df (int): Degrees of freedom of the reference t distribution.
        method (StatMethodEnum): Which test produced the result.
        exact_monotone (bool): True when |rho| = 1 and the p-value was short-circuited to 0.
    """
    statistic: float
    p_value: float
    df: int
    method: StatMethodEnum
    exact_monotone: bool

class ValidationIssue(TypedDict):
    """
    Attributes:
        code (str): Machine-readable issue code, e.g. `dangling_endpoint`.
        message (str): Human-readable description.
        subject (str): Id of the offending record (pattern, node, edge or attack).
        document (Optional[str]): Id of the containing document, when there is one.
    """
    code: str
    message: str
    subject: str
    document: Optional[str]

class AssessmentOptions(TypedDict, total=False):
    """
    Attributes:
        aggregation (Literal["mean", "max"]): How mapped pattern scores combine into an attack likelihood. (Default: mean)
        shift (float | ShiftCalibration): Additive likelihood shift, or a calibration carrying one. (Default: -0.13)
    """
    aggregation: Literal["mean", "max"]
    shift: float

class PanelProvenance(TypedDict):
    """
    Attributes:
        panel_size (int): Number of experts behind the consensus.
        aggregation (str): Aggregation used across experts.
        raw (str): `available` when per-expert scores were ingested, `unavailable` otherwise.
    """
    panel_size: int
    aggregation: str
    raw: str

class ReportMetadata(TypedDict):
    """
    Attributes:
        shift (float): Likelihood shift applied to every row.
        shift_source (str): `fixed` or `calibrated_against_direct`.
        aggregation (str): Pattern aggregation mode.
        severity_aspects (List[str]): Aspect ids of the severity model.
        severity_shift (float): Constant added to every composite severity.
        likelihood_panel (PanelProvenance): Provenance of the pattern likelihood consensus.
        severity_panel (PanelProvenance): Provenance of the severity consensus.
        timestamp (Optional[str]): ISO-8601 generation time; omitted for reproducible runs.
    """
    shift: float
    shift_source: str
    aggregation: str
    severity_aspects: List[str]
    severity_shift: float
    likelihood_panel: PanelProvenance
    severity_panel: PanelProvenance
    timestamp: Optional[str]

class ReportFormatEnum(str, Enum):
    CSV = "csv"
    MARKDOWN = "markdown"
    JSON_LINES = "json-lines"

class ReportSortEnum(str, Enum):
    # Device groups in catalog order, descending risk within each group.
    GROUP = "group"
    # The single global ranking.
    GLOBAL = "global"
