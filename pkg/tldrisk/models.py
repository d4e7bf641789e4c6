from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    AliasChoices,
    NonNegativeFloat,
    PositiveInt,
    field_serializer,
    field_validator,
    model_serializer,
    model_validator,
)
from typing import Annotated, Dict, List, Literal, Optional, Tuple, TypeAlias
from enum import Enum
from tldrisk.types.tldr import ValidationIssue

class AbstractionEnum(str, Enum):
    CATEGORY = "category"
    META = "meta"
    STANDARD = "standard"

class NodeKindEnum(str, Enum):
    COMPONENT = "Component"
    SUBCOMPONENT = "Subcomponent"
    TERMINATOR = "Terminator"
    NETWORK = "Network"
    LOGICAL_ENCAPSULATION = "LogicalEncapsulation"
    OUTER_COMPONENT = "OuterComponent"

class NoveltyEnum(str, Enum):
    KNOWN = "known"
    NEW = "new"

class RoleEnum(str, Enum):
    # Information security expert.
    ISE = "ISE"
    # Medical expert (radiology, for the bundled severity panel).
    ME = "ME"

class SubjectKindEnum(str, Enum):
    CAPEC_LIKELIHOOD = "capec"
    DIRECT_ATTACK_LIKELIHOOD = "direct"
    SEVERITY_MAGNITUDE = "severity"

class ShiftSourceEnum(str, Enum):
    FIXED = "fixed"
    CALIBRATED_AGAINST_DIRECT = "calibrated_against_direct"

# Device classes in report order. Any other non-empty name is an "Other" class.
KNOWN_DEVICE_CLASSES = ("GenericMID", "GenericCT", "GenericMRI", "GenericUltrasound")

PatternId: TypeAlias = Annotated[str, Field(min_length=1)]
AttackId: TypeAlias = Annotated[str, Field(min_length=1)]
DeviceClass: TypeAlias = Annotated[str, Field(min_length=1)]
Score: TypeAlias = Annotated[float, Field(ge=0.0, le=5.0)]

def _keyed_by_id(value):
    """Accept either an id-keyed mapping or a document array of records."""
    if isinstance(value, (list, tuple)):
        return {
            (item.get("id") if isinstance(item, dict) else item.id): item
            for item in value
        }
    return value

def _lowercase(value):
    return value.lower() if isinstance(value, str) else value


class AttackPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: PatternId
    name: str
    abstraction: AbstractionEnum
    summary: str = ""
    prerequisites: Tuple[str, ...] = ()
    # Ranges are checked by `capec.validate_catalog`, so out-of-range
    # documents still load and get reported.
    severity_default: Optional[int] = None
    likelihood_default: Optional[int] = None
    methods: Tuple[str, ...] = ()
    skill_required: Optional[int] = None
    mitigations: Tuple[str, ...] = ()
    parent_of: Optional[PatternId] = Field(
        validation_alias=AliasChoices('parent_of', 'child_of', 'parent'),
        default=None,
    )

    @field_validator('abstraction', mode='before')
    @classmethod
    def lowercase_abstraction(cls, value):
        return _lowercase(value)

class PatternCatalog(BaseModel):
    model_config = ConfigDict(frozen=True)

    patterns: Dict[str, AttackPattern] = {}
    source_label: str = ""

    @field_validator('patterns', mode='before')
    @classmethod
    def key_patterns(cls, value):
        return _keyed_by_id(value)

    @field_serializer('patterns')
    def serialize_patterns(self, patterns: Dict[str, AttackPattern], _info):
        return [p.model_dump(mode='json', exclude_defaults=True) for p in patterns.values()]


class AfdNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    label: str
    kind: NodeKindEnum
    parent: Optional[str] = None
    expands_to: Optional[str] = None

class Marking(BaseModel):
    model_config = ConfigDict(frozen=True)

    attack: AttackId = Field(
        validation_alias=AliasChoices('attack', 'attack_id'),
    )
    novelty: NoveltyEnum

    @field_validator('novelty', mode='before')
    @classmethod
    def lowercase_novelty(cls, value):
        return _lowercase(value)

class AfdEdge(BaseModel):
    """
    A directed information flow vector between two nodes.

    An edge carrying at least one marking is a "bold" edge that takes part in an attack.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    source: str = Field(
        validation_alias=AliasChoices('from', 'source'),
        serialization_alias="from",
    )
    target: str = Field(
        validation_alias=AliasChoices('to', 'target'),
        serialization_alias="to",
    )
    label: Optional[str] = None
    markings: frozenset[Marking] = frozenset()

    @field_serializer('markings')
    def serialize_markings(self, markings: frozenset[Marking], _info):
        return [
            m.model_dump(mode='json')
            for m in sorted(markings, key=lambda m: (m.attack, m.novelty.value))
        ]

    @property
    def key(self) -> Tuple[str, str]:
        return (self.source, self.target)

    @property
    def is_bold(self) -> bool:
        return len(self.markings) > 0

    @property
    def attack_ids(self) -> frozenset[str]:
        return frozenset(m.attack for m in self.markings)

class Afd(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    title: str = ""
    device: Optional[DeviceClass] = None
    nodes: Dict[str, AfdNode] = {}
    edges: Tuple[AfdEdge, ...] = ()

    @field_validator('nodes', mode='before')
    @classmethod
    def key_nodes(cls, value):
        return _keyed_by_id(value)

    @field_serializer('nodes')
    def serialize_nodes(self, nodes: Dict[str, AfdNode], _info):
        return [n.model_dump(mode='json', exclude_none=True) for n in nodes.values()]

    @field_serializer('edges')
    def serialize_edges(self, edges: Tuple[AfdEdge, ...], _info):
        return [e.model_dump(mode='json', by_alias=True, exclude_none=True) for e in edges]

    def find_edge(self, source: str, target: str) -> Optional[AfdEdge]:
        for edge in self.edges:
            if edge.key == (source, target):
                return edge
        return None


class Attack(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: AttackId
    name: str
    device: DeviceClass
    novelty: NoveltyEnum
    capec_refs: frozenset[PatternId] = Field(
        validation_alias=AliasChoices('capec_refs', 'capecs'),
    )
    citations: Tuple[str, ...] = ()

    @field_validator('novelty', mode='before')
    @classmethod
    def lowercase_novelty(cls, value):
        return _lowercase(value)

    @field_serializer('capec_refs')
    def serialize_capec_refs(self, capec_refs: frozenset[str], _info):
        return sorted(capec_refs)

class AttackCatalog(BaseModel):
    model_config = ConfigDict(frozen=True)

    attacks: Dict[str, Attack] = {}
    source_label: str = ""

    @field_validator('attacks', mode='before')
    @classmethod
    def key_attacks(cls, value):
        return _keyed_by_id(value)

    @field_serializer('attacks')
    def serialize_attacks(self, attacks: Dict[str, Attack], _info):
        return [a.model_dump(mode='json', exclude_defaults=True) for a in attacks.values()]

    @property
    def device_order(self) -> List[str]:
        """Known device classes in their canonical order, then other classes by first appearance."""
        present = [a.device for a in self.attacks.values()]
        known = [d for d in KNOWN_DEVICE_CLASSES if d in present]
        others = list(dict.fromkeys(d for d in present if d not in KNOWN_DEVICE_CLASSES))
        return known + others


class Expert(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    role: RoleEnum
    note: str = ""

class EstimateSet(BaseModel):
    """
    One expert's answers to one survey.

    The survey document is flat (`expert`, `role`, `note` beside `kind` and
    `scores`); the expert fields are folded into an `Expert` on load and
    flattened back on dump.
    """
    model_config = ConfigDict(frozen=True)

    expert: Expert
    kind: SubjectKindEnum
    aspect: Optional[str] = None
    scores: Dict[str, Score]

    @model_validator(mode='before')
    @classmethod
    def fold_expert_fields(cls, data):
        if isinstance(data, dict) and not isinstance(data.get("expert"), (dict, Expert)):
            data = dict(data)
            data["expert"] = {
                "id": data.get("expert"),
                "role": data.pop("role", None),
                "note": data.pop("note", ""),
            }
        return data

    @model_validator(mode='after')
    def check_aspect(self):
        if self.kind == SubjectKindEnum.SEVERITY_MAGNITUDE and not self.aspect:
            raise ValueError("severity surveys must name an `aspect`")
        return self

    @model_serializer(mode='wrap')
    def flatten_expert(self, handler):
        data = handler(self)
        expert = data.pop("expert")
        out = {"expert": expert["id"], "role": expert["role"]}
        if expert["note"]:
            out["note"] = expert["note"]
        out.update({k: v for k, v in data.items() if v is not None})
        return out

class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    panel_size: PositiveInt
    aggregation: str = "mean"
    raw: Literal["available", "unavailable"] = "available"
    # Pre-normalization consensus values, kept when a vector is rescaled.
    raw_values: Optional[Dict[str, float]] = None

class ConsensusVector(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: SubjectKindEnum
    aspect: Optional[str] = None
    values: Dict[str, float]
    # False for the 0..5 elicitation scale, True for the [0, 1] likelihood scale.
    normalized: bool = False
    provenance: Provenance
    source_label: str = ""


class SeverityAspect(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    weight: NonNegativeFloat

class SeverityModel(BaseModel):
    """
    Composite severity as a weighted sum of per-aspect impact magnitudes plus a constant.

    Weights are normalized to sum to 1 on construction.
    """
    model_config = ConfigDict(frozen=True)

    aspects: Tuple[SeverityAspect, ...] = Field(min_length=1)
    shift: float = 0.0

    @field_validator('aspects')
    @classmethod
    def normalize_weights(cls, aspects: Tuple[SeverityAspect, ...]) -> Tuple[SeverityAspect, ...]:
        ids = [a.id for a in aspects]
        if len(set(ids)) != len(ids):
            raise ValueError("aspect ids must be unique")
        total = sum(a.weight for a in aspects)
        if total <= 0:
            raise ValueError("aspect weights must not all be zero")
        return tuple(SeverityAspect(id=a.id, weight=a.weight / total) for a in aspects)

    @property
    def m(self) -> int:
        return len(self.aspects)

    @property
    def weights(self) -> Dict[str, float]:
        return {a.id: a.weight for a in self.aspects}

class ShiftCalibration(BaseModel):
    model_config = ConfigDict(frozen=True)

    c_like: float = Field(ge=-1.0, le=1.0)
    source: ShiftSourceEnum = ShiftSourceEnum.FIXED


class AssessmentRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    attack_id: AttackId
    name: str = ""
    device: DeviceClass = "Other"
    capec_refs: frozenset[PatternId] = frozenset()
    likelihood: float = Field(ge=0.0, le=1.0)
    likelihood_shifted: float = Field(ge=0.0, le=1.0)
    severity: float = Field(ge=0.0, le=5.0)
    risk: float
    rank: Optional[PositiveInt] = None

    @field_serializer('capec_refs')
    def serialize_capec_refs(self, capec_refs: frozenset[str], _info):
        return sorted(capec_refs)


class ValidationReport(BaseModel):
    """
    Collected findings of a validator. Validators never raise; a report with
    no `errors` means the input is valid. `notices` never affect validity.
    """
    errors: List[ValidationIssue] = []
    notices: List[ValidationIssue] = []

    @property
    def is_valid(self) -> bool:
        return len(self.errors) == 0

    def add_error(self, code: str, message: str, subject: str, document: Optional[str] = None) -> None:
        self.errors.append({"code": code, "message": message, "subject": subject, "document": document})

    def add_notice(self, code: str, message: str, subject: str, document: Optional[str] = None) -> None:
        self.notices.append({"code": code, "message": message, "subject": subject, "document": document})

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(
            errors=[*self.errors, *other.errors],
            notices=[*self.notices, *other.notices],
        )
