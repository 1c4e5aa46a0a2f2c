"""Shared domain types: areas, participants, responses, and cohort partitioning."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence


class DomainError(ValueError):
    """Domain-rule violation with a machine-readable reason code."""

    def __init__(self, message: str, reason: str = "domain_error"):
        super().__init__(message)
        self.reason = reason


class FamiliarityLevel(str, Enum):
    """Four-step exposure scale collected before any sequence is shown."""

    NOT_FAMILIAR = "not_familiar"
    QUICK_VISITS = "quick_visits"
    REGULAR_ATTENDANCE = "regular_attendance"
    CONTINUOUS_RESIDENCE = "continuous_residence"

    @property
    def weight(self) -> Fraction:
        return _LEVEL_WEIGHTS[self]


# Exact tenths so rate aggregates stay exact until display rounding.
_LEVEL_WEIGHTS: Mapping[FamiliarityLevel, Fraction] = {
    FamiliarityLevel.NOT_FAMILIAR: Fraction(0),
    FamiliarityLevel.QUICK_VISITS: Fraction(4, 10),
    FamiliarityLevel.REGULAR_ATTENDANCE: Fraction(7, 10),
    FamiliarityLevel.CONTINUOUS_RESIDENCE: Fraction(1),
}


class ParticipantGroup(str, Enum):
    """Stored cohort tag. The general group is always derived, never stored."""

    LOCAL = "local"
    FOREIGN = "foreign"


#: Selector value for the derived whole-cohort view.
GENERAL = "general"

#: All report-facing group selectors.
GROUP_SELECTORS = (GENERAL, ParticipantGroup.LOCAL.value, ParticipantGroup.FOREIGN.value)


class ResidenceBucket(str, Enum):
    UNDER_1Y = "le1y"
    Y1_TO_3 = "1to3y"
    Y3_TO_5 = "3to5y"
    OVER_5Y = "ge5y"

    @property
    def label(self) -> str:
        return _BUCKET_LABELS[self]


_BUCKET_LABELS = {
    ResidenceBucket.UNDER_1Y: "≤1y",
    ResidenceBucket.Y1_TO_3: "1-3y",
    ResidenceBucket.Y3_TO_5: "3-5y",
    ResidenceBucket.OVER_5Y: "≥5y",
}

#: Count key for participants that left the residence question unanswered.
UNSPECIFIED = "unspecified"


class Phase(str, Enum):
    """Forward-only session phases of the staged viewing protocol."""

    PRE_VIEWING = "pre_viewing"
    FAMILIARIZATION = "familiarization"
    IN_DEPTH = "in_depth"
    COMPLETE = "complete"

    @property
    def successor(self) -> Optional["Phase"]:
        order = list(Phase)
        idx = order.index(self)
        return order[idx + 1] if idx + 1 < len(order) else None


@dataclass(frozen=True)
class StudyArea:
    """One study area with its development-origin rank (1 = most organic)."""

    area_id: str
    display_name: str
    origin_rank: int


def validate_areas(areas: Sequence[StudyArea]) -> None:
    """Check area ids are unique and origin ranks form a permutation of 1..N."""
    seen = set()
    for area in areas:
        if area.area_id in seen:
            raise DomainError(f"duplicate area_id: {area.area_id}", reason="duplicate_area")
        seen.add(area.area_id)
    ranks = sorted(a.origin_rank for a in areas)
    if ranks != list(range(1, len(areas) + 1)):
        raise DomainError(
            f"origin ranks must be a permutation of 1..{len(areas)}, got {ranks}",
            reason="bad_origin_ranks",
        )


@dataclass(frozen=True)
class ParticipantRecord:
    participant_id: str
    group: ParticipantGroup
    age: Optional[int] = None
    residence_bucket: Optional[ResidenceBucket] = None
    profession: Optional[str] = None
    ai_familiarity: Optional[str] = None
    #: area_id -> level; complete over the study's areas once submitted.
    familiarity_profile: Mapping[str, FamiliarityLevel] = field(default_factory=dict)

    def with_profile(self, profile: Mapping[str, FamiliarityLevel]) -> "ParticipantRecord":
        return ParticipantRecord(
            participant_id=self.participant_id,
            group=self.group,
            age=self.age,
            residence_bucket=self.residence_bucket,
            profession=self.profession,
            ai_familiarity=self.ai_familiarity,
            familiarity_profile=dict(profile),
        )


def validate_profile(profile: Mapping[str, FamiliarityLevel], areas: Sequence[StudyArea]) -> None:
    """Require the profile to cover every study area exactly once."""
    area_ids = {a.area_id for a in areas}
    missing = sorted(area_ids - set(profile))
    extra = sorted(set(profile) - area_ids)
    if missing:
        raise DomainError(f"familiarity profile missing areas: {', '.join(missing)}", reason="incomplete_profile")
    if extra:
        raise DomainError(f"familiarity profile names unknown areas: {', '.join(extra)}", reason="unknown_area")


@dataclass(frozen=True)
class SequenceResponse:
    """One participant's final answer set for one sequence.

    ``guessed_area_id`` is None for an explicit blank: the participant viewed
    the sequence but made no area assignment. Blanks are first-class and are
    handled by the accuracy-rate blank policy, never silently coerced.
    """

    participant_id: str
    sequence_id: str
    guessed_area_id: Optional[str]
    q2_text: str = ""
    q3_text: str = ""
    q4_text: str = ""
    q5_text: str = ""
    loops_viewed: int = 0

    @property
    def is_blank(self) -> bool:
        return self.guessed_area_id is None

    def free_text(self, fields: Sequence[str] = ("q2", "q3", "q4", "q5")) -> list[str]:
        texts = {"q2": self.q2_text, "q3": self.q3_text, "q4": self.q4_text, "q5": self.q5_text}
        return [texts[f] for f in fields]


def partition_cohort(participants: Sequence[ParticipantRecord]) -> dict[str, list[str]]:
    """Split a cohort into local/foreign lists plus the derived general union.

    Preserves input order inside every list. Rejects duplicate participant ids.
    """
    seen: set[str] = set()
    groups: dict[str, list[str]] = {
        GENERAL: [],
        ParticipantGroup.LOCAL.value: [],
        ParticipantGroup.FOREIGN.value: [],
    }
    for p in participants:
        if p.participant_id in seen:
            raise DomainError(
                f"duplicate participant_id: {p.participant_id}", reason="duplicate_participant"
            )
        seen.add(p.participant_id)
        groups[p.group.value].append(p.participant_id)
        groups[GENERAL].append(p.participant_id)
    return groups


@dataclass(frozen=True)
class CohortSummary:
    total: int
    by_group: Mapping[str, int]
    by_residence: Mapping[str, int]
    age_min: Optional[int]
    age_max: Optional[int]


def summarize_cohort(participants: Sequence[ParticipantRecord]) -> CohortSummary:
    """Count participants by group and residence bucket, and report the age range.

    Missing optional fields are counted under ``unspecified`` so bucket counts
    always sum to the cohort size.
    """
    by_group = {g.value: 0 for g in ParticipantGroup}
    by_residence: dict[str, int] = {b.value: 0 for b in ResidenceBucket}
    by_residence[UNSPECIFIED] = 0
    ages: list[int] = []
    for p in participants:
        by_group[p.group.value] += 1
        key = p.residence_bucket.value if p.residence_bucket is not None else UNSPECIFIED
        by_residence[key] += 1
        if p.age is not None:
            ages.append(p.age)
    return CohortSummary(
        total=len(participants),
        by_group=by_group,
        by_residence=by_residence,
        age_min=min(ages) if ages else None,
        age_max=max(ages) if ages else None,
    )
