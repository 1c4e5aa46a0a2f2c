"""Study configuration: stimulus manifests, dataset composition checks,
training-config sanity checks, sector grids with seeded height assignment,
phase schedule, questionnaire instrument, and the study-definition document."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .model import DomainError, StudyArea, validate_areas
from .semantic import normalize_tokens


class Severity(str, Enum):
    FAILURE = "failure"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    subject: str
    findings: tuple[Finding, ...] = ()
    #: derived quantities surfaced for callers (e.g. computed fps)
    details: Mapping[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not any(f.severity is Severity.FAILURE for f in self.findings)

    def failures(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.FAILURE]

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(
            subject=self.subject,
            findings=self.findings + other.findings,
            details={**self.details, **other.details},
        )


# ---------------------------------------------------------------- stimuli

#: Upper bound on the video-generation denoising strength; sequences produced
#: above it drift too far from the source geometry to count as the same place.
DENOISING_MAX = 0.68
FPS_TOLERANCE = 0.5


@dataclass(frozen=True)
class StimulusManifest:
    sequence_id: str
    area_id: str
    media_uri: str
    duration_s: float
    frame_count: int
    nominal_fps: float
    denoising_strength: float


def validate_sequence_manifest(m: StimulusManifest, fps_tolerance: float = FPS_TOLERANCE) -> ValidationReport:
    findings: list[Finding] = []
    details: dict[str, object] = {}
    if m.duration_s <= 0:
        findings.append(Finding(Severity.FAILURE, "bad_duration", f"duration_s must be positive, got {m.duration_s}"))
    if m.frame_count <= 0:
        findings.append(Finding(Severity.FAILURE, "bad_frame_count", f"frame_count must be positive, got {m.frame_count}"))
    if m.duration_s > 0 and m.frame_count > 0:
        derived = m.frame_count / m.duration_s
        details["derived_fps"] = derived
        findings.append(Finding(Severity.INFO, "derived_fps", f"derived fps {derived:.2f}"))
        if abs(derived - m.nominal_fps) > fps_tolerance:
            findings.append(
                Finding(
                    Severity.FAILURE,
                    "fps_mismatch",
                    f"derived fps {derived:.2f} differs from nominal {m.nominal_fps} by more than {fps_tolerance}",
                )
            )
    if not 0 <= m.denoising_strength <= 1:
        findings.append(
            Finding(Severity.FAILURE, "bad_denoising", f"denoising_strength must be in [0,1], got {m.denoising_strength}")
        )
    elif m.denoising_strength > DENOISING_MAX:
        findings.append(
            Finding(
                Severity.FAILURE,
                "denoising_exceeds_bound",
                f"denoising_strength {m.denoising_strength} exceeds the {DENOISING_MAX} bound",
            )
        )
    return ValidationReport(subject=m.sequence_id, findings=tuple(findings), details=details)


# ---------------------------------------------------------------- datasets

class ImageTypology(str, Enum):
    STREET_VIEW = "street"
    FACADE = "facade"
    DETAIL = "detail"


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    typology: ImageTypology
    width_px: int
    height_px: int


#: Typology mix the curated training sets aim for, in percent.
DEFAULT_COMPOSITION = {
    ImageTypology.STREET_VIEW: Fraction(63),
    ImageTypology.FACADE: Fraction(35),
    ImageTypology.DETAIL: Fraction(2),
}

DEFAULT_SIZE_RANGE = (60, 66)


@dataclass(frozen=True)
class DatasetManifest:
    area_id: str
    image_records: tuple[ImageRecord, ...]
    target_composition: Mapping[ImageTypology, Fraction] = field(
        default_factory=lambda: dict(DEFAULT_COMPOSITION)
    )
    size_range: tuple[int, int] = DEFAULT_SIZE_RANGE


def validate_dataset_composition(d: DatasetManifest, tolerance_pp: Fraction = Fraction(3)) -> ValidationReport:
    findings: list[Finding] = []
    details: dict[str, object] = {}
    total = len(d.image_records)
    target_sum = sum(d.target_composition.values())
    if target_sum != 100:
        findings.append(
            Finding(Severity.FAILURE, "bad_targets", f"target composition sums to {target_sum}%, expected 100%")
        )
    if total == 0:
        findings.append(Finding(Severity.FAILURE, "empty_dataset", "dataset has no images"))
        return ValidationReport(subject=d.area_id, findings=tuple(findings), details=details)
    lo, hi = d.size_range
    if not lo <= total <= hi:
        findings.append(
            Finding(Severity.FAILURE, "size_out_of_range", f"dataset size {total} outside [{lo}, {hi}]")
        )
    shares: dict[str, float] = {}
    for typology in ImageTypology:
        count = sum(1 for r in d.image_records if r.typology is typology)
        share_pp = Fraction(count * 100, total)
        shares[typology.value] = float(share_pp)
        target = d.target_composition.get(typology, Fraction(0))
        if abs(share_pp - target) > tolerance_pp:
            findings.append(
                Finding(
                    Severity.FAILURE,
                    "composition_off_target",
                    f"{typology.value} share {float(share_pp):.1f}% misses target {float(target):.0f}% "
                    f"by more than {float(tolerance_pp):.0f}pp",
                )
            )
    details["shares_pp"] = shares
    return ValidationReport(subject=d.area_id, findings=tuple(findings), details=details)


# ---------------------------------------------------------------- training config

@dataclass(frozen=True)
class LoraTrainingConfig:
    max_resolution_px: int
    epochs: int
    batch_size: int
    learning_rate: float


#: Training recipe of the reference study; divergence is informational.
REFERENCE_TRAINING = LoraTrainingConfig(
    max_resolution_px=768, epochs=12, batch_size=2, learning_rate=0.00002
)


def validate_training_config(c: LoraTrainingConfig) -> ValidationReport:
    findings: list[Finding] = []
    for name in ("max_resolution_px", "epochs", "batch_size", "learning_rate"):
        value = getattr(c, name)
        if value <= 0:
            findings.append(Finding(Severity.FAILURE, "nonpositive_field", f"{name} must be positive, got {value}"))
        elif value != getattr(REFERENCE_TRAINING, name):
            findings.append(
                Finding(
                    Severity.INFO,
                    "diverges_from_reference",
                    f"{name} {value} differs from reference {getattr(REFERENCE_TRAINING, name)}",
                )
            )
    return ValidationReport(subject="training-config", findings=tuple(findings))


# ---------------------------------------------------------------- sector grid

@dataclass(frozen=True)
class Sector:
    sector_id: str
    row: int
    col: int
    assigned_area_id: str


@dataclass(frozen=True)
class SectorGrid:
    extent_m: float
    sector_size_m: float
    rows: int
    cols: int
    sectors: tuple[Sector, ...]


def build_sector_grid(
    extent_m: float, sector_size_m: float, assignments: Mapping[tuple[int, int], str]
) -> SectorGrid:
    """Subdivide a square extent into equal square sectors with area tags.

    The extent must divide evenly: a fractional row count has no geometric
    meaning, so e.g. a 1500 m extent with 200 m sectors is rejected with the
    7.5 ratio in the message rather than silently truncated.
    """
    if extent_m <= 0 or sector_size_m <= 0:
        raise DomainError("extent and sector size must be positive", reason="bad_dimensions")
    ratio = Fraction(extent_m) / Fraction(sector_size_m)
    if ratio.denominator != 1:
        raise DomainError(
            f"extent {extent_m} m does not divide into {sector_size_m} m sectors: "
            f"{extent_m}/{sector_size_m} = {float(ratio)} is not an integer",
            reason="noninteger_grid",
        )
    side = int(ratio)
    expected = {(r, c) for r in range(side) for c in range(side)}
    given = set(assignments)
    missing = sorted(expected - given)
    extra = sorted(given - expected)
    if missing:
        raise DomainError(f"assignments missing cells: {missing[:5]}{'…' if len(missing) > 5 else ''}", reason="missing_cells")
    if extra:
        raise DomainError(f"assignments name cells outside the grid: {extra[:5]}", reason="extra_cells")
    sectors = tuple(
        Sector(sector_id=f"r{r}c{c}", row=r, col=c, assigned_area_id=assignments[(r, c)])
        for r in range(side)
        for c in range(side)
    )
    return SectorGrid(extent_m=extent_m, sector_size_m=sector_size_m, rows=side, cols=side, sectors=sectors)


def assign_heights(
    grid: SectorGrid, zone_limits: Mapping[str, tuple[float, float]], seed: int
) -> dict[str, float]:
    """Draw one uniform height per sector inside its zone's limits.

    Each sector gets its own generator keyed by (seed, sector_id), so the
    result is independent of sector iteration order and reproducible.
    """
    for sector in grid.sectors:
        if sector.assigned_area_id not in zone_limits:
            raise DomainError(f"no height limits for zone {sector.assigned_area_id}", reason="missing_zone_limits")
    for zone, (lo, hi) in zone_limits.items():
        if lo <= 0 or hi <= 0 or lo > hi:
            raise DomainError(f"bad height limits for zone {zone}: [{lo}, {hi}]", reason="bad_zone_limits")
    heights = {}
    for sector in grid.sectors:
        lo, hi = zone_limits[sector.assigned_area_id]
        rng = random.Random(f"{seed}:{sector.sector_id}")
        heights[sector.sector_id] = rng.uniform(lo, hi)
    return heights


# ---------------------------------------------------------------- captions

@dataclass(frozen=True)
class TokenStats:
    count: int
    caption_count: int

    @property
    def repetition_ratio(self) -> Fraction:
        return Fraction(self.count, self.caption_count)


def caption_token_stats(captions: Sequence[str]) -> dict[str, TokenStats]:
    """Exact token counts over a caption set plus per-token repetition ratio.

    Ratio is total occurrences over the number of captions containing the
    token, so deliberately repeated trigger tokens stand out.
    """
    if not captions:
        raise DomainError("caption list is empty", reason="empty_captions")
    counts: dict[str, int] = {}
    containing: dict[str, int] = {}
    for caption in captions:
        tokens = normalize_tokens(caption)
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for t in set(tokens):
            containing[t] = containing.get(t, 0) + 1
    return {t: TokenStats(count=counts[t], caption_count=containing[t]) for t in sorted(counts)}


# ---------------------------------------------------------------- schedule & instrument

@dataclass(frozen=True)
class PhaseSchedule:
    pre_viewing_min: float = 5
    familiarization_min: float = 15
    familiarization_loops: int = 2
    in_depth_min: float = 60
    in_depth_loops_per_sequence: int = 5

    def __post_init__(self):
        for name in ("pre_viewing_min", "familiarization_min", "familiarization_loops",
                     "in_depth_min", "in_depth_loops_per_sequence"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be strictly positive", reason="bad_schedule")


class AnalyticalRole(str, Enum):
    FAMILIARITY_RATE = "familiarity_rate"
    ACCURACY_RATE = "accuracy_rate"
    SEMANTIC_ANALYSIS = "semantic_analysis"


@dataclass(frozen=True)
class QuestionnaireItem:
    item_no: int
    analytical_role: AnalyticalRole
    prompt_text: str


#: item_no → required role: 0 feeds familiarity, 1 the area assignment,
#: 2..5 the free-text semantic pipeline.
_REQUIRED_ROLES = {
    0: AnalyticalRole.FAMILIARITY_RATE,
    1: AnalyticalRole.ACCURACY_RATE,
    2: AnalyticalRole.SEMANTIC_ANALYSIS,
    3: AnalyticalRole.SEMANTIC_ANALYSIS,
    4: AnalyticalRole.SEMANTIC_ANALYSIS,
    5: AnalyticalRole.SEMANTIC_ANALYSIS,
}


@dataclass(frozen=True)
class QuestionnaireInstrument:
    items: tuple[QuestionnaireItem, ...]

    def __post_init__(self):
        numbers = [i.item_no for i in self.items]
        if numbers != sorted(_REQUIRED_ROLES):
            raise DomainError(f"instrument must carry items 0..5, got {numbers}", reason="bad_instrument")
        for item in self.items:
            required = _REQUIRED_ROLES[item.item_no]
            if item.analytical_role is not required:
                raise DomainError(
                    f"item {item.item_no} must have role {required.value}, got {item.analytical_role.value}",
                    reason="bad_instrument",
                )


def default_instrument() -> QuestionnaireInstrument:
    return QuestionnaireInstrument(
        items=(
            QuestionnaireItem(0, AnalyticalRole.FAMILIARITY_RATE,
                              "Mark how much first-hand exposure you have to each listed area."),
            QuestionnaireItem(1, AnalyticalRole.ACCURACY_RATE,
                              "Which of the listed areas does this sequence show? Leave blank if you cannot tell."),
            QuestionnaireItem(2, AnalyticalRole.SEMANTIC_ANALYSIS,
                              "Which visual cues led you to that choice?"),
            QuestionnaireItem(3, AnalyticalRole.SEMANTIC_ANALYSIS,
                              "Describe the overall character of the place in your own words."),
            QuestionnaireItem(4, AnalyticalRole.SEMANTIC_ANALYSIS,
                              "Did anything feel out of place or artificial? What?"),
            QuestionnaireItem(5, AnalyticalRole.SEMANTIC_ANALYSIS,
                              "What would have made the area easier to recognize?"),
        )
    )


# ---------------------------------------------------------------- study definition

@dataclass(frozen=True)
class StudyDefinition:
    study_id: str
    title: str
    areas: tuple[StudyArea, ...]
    stimuli: tuple[StimulusManifest, ...]
    schedule: PhaseSchedule = PhaseSchedule()
    instrument: QuestionnaireInstrument = field(default_factory=default_instrument)

    def truth(self) -> dict[str, str]:
        """sequence_id → area_id answer key."""
        return {m.sequence_id: m.area_id for m in self.stimuli}

    def area_ids(self) -> list[str]:
        return [a.area_id for a in self.areas]

    def to_dict(self) -> dict:
        return {
            "study_id": self.study_id,
            "title": self.title,
            "areas": [
                {"area_id": a.area_id, "display_name": a.display_name, "origin_rank": a.origin_rank}
                for a in self.areas
            ],
            "stimuli": [
                {
                    "sequence_id": m.sequence_id,
                    "area_id": m.area_id,
                    "media_uri": m.media_uri,
                    "duration_s": m.duration_s,
                    "frame_count": m.frame_count,
                    "nominal_fps": m.nominal_fps,
                    "denoising_strength": m.denoising_strength,
                }
                for m in self.stimuli
            ],
            "schedule": {
                "pre_viewing_min": self.schedule.pre_viewing_min,
                "familiarization_min": self.schedule.familiarization_min,
                "familiarization_loops": self.schedule.familiarization_loops,
                "in_depth_min": self.schedule.in_depth_min,
                "in_depth_loops_per_sequence": self.schedule.in_depth_loops_per_sequence,
            },
            "instrument": {
                "items": [
                    {"item_no": i.item_no, "analytical_role": i.analytical_role.value, "prompt_text": i.prompt_text}
                    for i in self.instrument.items
                ]
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StudyDefinition":
        try:
            areas = tuple(
                StudyArea(area_id=a["area_id"], display_name=a["display_name"], origin_rank=int(a["origin_rank"]))
                for a in data["areas"]
            )
            stimuli = tuple(
                StimulusManifest(
                    sequence_id=m["sequence_id"],
                    area_id=m["area_id"],
                    media_uri=m.get("media_uri", ""),
                    duration_s=float(m["duration_s"]),
                    frame_count=int(m["frame_count"]),
                    nominal_fps=float(m["nominal_fps"]),
                    denoising_strength=float(m["denoising_strength"]),
                )
                for m in data["stimuli"]
            )
            schedule_data = data.get("schedule", {})
            schedule = PhaseSchedule(**schedule_data) if schedule_data else PhaseSchedule()
            inst_data = data.get("instrument")
            if inst_data:
                instrument = QuestionnaireInstrument(
                    items=tuple(
                        QuestionnaireItem(
                            item_no=int(i["item_no"]),
                            analytical_role=AnalyticalRole(i["analytical_role"]),
                            prompt_text=i["prompt_text"],
                        )
                        for i in inst_data["items"]
                    )
                )
            else:
                instrument = default_instrument()
            return cls(
                study_id=data["study_id"],
                title=data.get("title", data["study_id"]),
                areas=areas,
                stimuli=stimuli,
                schedule=schedule,
                instrument=instrument,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"malformed study definition: {exc}", reason="bad_definition") from exc

    @classmethod
    def from_json(cls, text: str) -> "StudyDefinition":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"study definition is not valid JSON: {exc}", reason="bad_definition") from exc
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def validate_study_definition(defn: StudyDefinition, strict: bool = False) -> ValidationReport:
    """Structural checks plus per-stimulus manifest checks.

    Manifest findings are demoted to warnings unless ``strict``: a study can
    start collecting responses while its media are still being regenerated.
    """
    findings: list[Finding] = []
    try:
        validate_areas(defn.areas)
    except DomainError as exc:
        findings.append(Finding(Severity.FAILURE, exc.reason, str(exc)))
    area_ids = {a.area_id for a in defn.areas}
    seen_seq: set[str] = set()
    covered: set[str] = set()
    for m in defn.stimuli:
        if m.sequence_id in seen_seq:
            findings.append(Finding(Severity.FAILURE, "duplicate_sequence", f"duplicate sequence_id: {m.sequence_id}"))
        seen_seq.add(m.sequence_id)
        if m.area_id not in area_ids:
            findings.append(Finding(Severity.FAILURE, "unknown_area", f"stimulus {m.sequence_id} references unknown area {m.area_id}"))
        else:
            covered.add(m.area_id)
        report = validate_sequence_manifest(m)
        for f in report.failures():
            severity = Severity.FAILURE if strict else Severity.WARNING
            findings.append(Finding(severity, f.code, f"stimulus {m.sequence_id}: {f.message}"))
    for area_id in sorted(area_ids - covered):
        findings.append(Finding(Severity.WARNING, "area_without_stimulus", f"area {area_id} has no stimulus"))
    if not defn.stimuli:
        findings.append(Finding(Severity.FAILURE, "no_stimuli", "study defines no stimulus sequences"))
    return ValidationReport(subject=defn.study_id, findings=tuple(findings))
