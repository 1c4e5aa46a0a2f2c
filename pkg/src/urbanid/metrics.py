"""Rate metrics over collected responses: familiarity, accuracy, rankings, divergence.

All arithmetic is exact (fractions.Fraction). Rounding happens once, at the
display boundary, half away from zero. Rankings and identities compare exact
values, never rounded ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .model import DomainError, FamiliarityLevel, SequenceResponse, StudyArea


def display_percent(exact: Fraction) -> int:
    """Round an exact rate in [0,1] to an integer percent, half away from zero."""
    scaled = exact * 100
    floor, rem = divmod(scaled.numerator, scaled.denominator)
    # 2*rem == den is the exact half case; round it away from zero
    if 2 * rem >= scaled.denominator:
        return floor + 1
    return floor


@dataclass(frozen=True)
class RatePercent:
    """An exact rate plus its rounded presentation value."""

    exact_value: Fraction
    display: int

    @classmethod
    def from_fraction(cls, exact: Fraction) -> "RatePercent":
        if not 0 <= exact <= 1:
            raise DomainError(f"rate {exact} outside [0,1]", reason="rate_out_of_range")
        return cls(exact_value=exact, display=display_percent(exact))


@dataclass(frozen=True)
class AccuracyInputs:
    correct_count: int
    considered_count: int

    def __post_init__(self):
        if self.considered_count < 1:
            raise DomainError("considered count must be positive", reason="empty_denominator")
        if not 0 <= self.correct_count <= self.considered_count:
            raise DomainError(
                f"correct count {self.correct_count} outside [0, {self.considered_count}]",
                reason="bad_counts",
            )


class BlankPolicy(str, Enum):
    """How blank area guesses enter the accuracy denominator."""

    EXCLUDE = "exclude"
    INCORRECT = "incorrect"


class MetricKind(str, Enum):
    SEQUENCE_ACCURACY = "sequence_accuracy"
    FAMILIARITY = "familiarity"


def familiarity_rate(levels: Sequence[FamiliarityLevel]) -> RatePercent:
    """Mean familiarity weight across respondents for one area."""
    if not levels:
        raise DomainError("familiarity rate undefined for zero respondents", reason="empty_group")
    total = sum((lv.weight for lv in levels), Fraction(0))
    return RatePercent.from_fraction(total / len(levels))


def accuracy_rate(inputs: AccuracyInputs) -> RatePercent:
    return RatePercent.from_fraction(Fraction(inputs.correct_count, inputs.considered_count))


def _considered(
    responses: Iterable[SequenceResponse], policy: BlankPolicy
) -> list[tuple[SequenceResponse, bool]]:
    """Pair each considered response with whether its guess can score as correct.

    Blank guesses are dropped under EXCLUDE and kept (never correct) under
    INCORRECT.
    """
    out = []
    for r in responses:
        if r.is_blank and policy is BlankPolicy.EXCLUDE:
            continue
        out.append((r, not r.is_blank))
    return out


def _score(
    responses: Iterable[SequenceResponse],
    truth: Mapping[str, str],
    policy: BlankPolicy,
) -> AccuracyInputs:
    correct = 0
    considered = 0
    for r, scorable in _considered(responses, policy):
        if r.sequence_id not in truth:
            raise DomainError(f"unknown sequence_id: {r.sequence_id}", reason="unknown_sequence")
        considered += 1
        if scorable and r.guessed_area_id == truth[r.sequence_id]:
            correct += 1
    if considered == 0:
        raise DomainError("no responses considered under policy", reason="empty_considered")
    return AccuracyInputs(correct_count=correct, considered_count=considered)


def accuracy_per_participant(
    responses: Sequence[SequenceResponse],
    participant_id: str,
    truth: Mapping[str, str],
    policy: BlankPolicy = BlankPolicy.EXCLUDE,
) -> tuple[RatePercent, AccuracyInputs]:
    """Accuracy of one participant's area assignments across all sequences."""
    own = [r for r in responses if r.participant_id == participant_id]
    inputs = _score(own, truth, policy)
    return accuracy_rate(inputs), inputs


def sequence_accuracy(
    responses: Sequence[SequenceResponse],
    sequence_id: str,
    member_ids: Iterable[str],
    truth: Mapping[str, str],
    policy: BlankPolicy = BlankPolicy.EXCLUDE,
) -> tuple[RatePercent, AccuracyInputs]:
    """Share of a group that correctly identified one sequence's area.

    This per-sequence accuracy is the identifiability score reported per area:
    how reliably the group recognizes that area from its sequence alone.
    """
    members = set(member_ids)
    rows = [r for r in responses if r.sequence_id == sequence_id and r.participant_id in members]
    inputs = _score(rows, truth, policy)
    return accuracy_rate(inputs), inputs


def cohort_mean_accuracy(
    responses: Sequence[SequenceResponse],
    member_ids: Iterable[str],
    truth: Mapping[str, str],
    policy: BlankPolicy = BlankPolicy.EXCLUDE,
) -> tuple[RatePercent, AccuracyInputs]:
    """Pooled accuracy over the whole group: total correct / total considered."""
    members = set(member_ids)
    rows = [r for r in responses if r.participant_id in members]
    inputs = _score(rows, truth, policy)
    return accuracy_rate(inputs), inputs


def accuracy_histogram(
    responses: Sequence[SequenceResponse],
    member_ids: Iterable[str],
    truth: Mapping[str, str],
    policy: BlankPolicy = BlankPolicy.EXCLUDE,
) -> dict[int, int]:
    """Count participants per display-percent accuracy bin.

    Participants with zero considered responses are skipped, so the counts sum
    to the number of scored participants.
    """
    bins: dict[int, int] = {}
    for pid in member_ids:
        own = [r for r in responses if r.participant_id == pid]
        try:
            rate, _ = accuracy_per_participant(own, pid, truth, policy)
        except DomainError:
            continue
        bins[rate.display] = bins.get(rate.display, 0) + 1
    return dict(sorted(bins.items()))


@dataclass(frozen=True)
class RankedRow:
    area_id: str
    metric: RatePercent
    rank: int


@dataclass(frozen=True)
class RankedTable:
    group: str
    metric_kind: MetricKind
    rows: tuple[RankedRow, ...]

    def rank_of(self, area_id: str) -> int:
        for row in self.rows:
            if row.area_id == area_id:
                return row.rank
        raise DomainError(f"area not in table: {area_id}", reason="unknown_area")


def rank_table(
    values: Mapping[str, RatePercent],
    metric_kind: MetricKind,
    group: str,
    areas: Sequence[StudyArea],
) -> RankedTable:
    """Order areas by exact metric value descending, ranks 1..N.

    Ties break toward the lower origin rank (more organically grown area),
    then lexicographic area_id. Ranks are contiguous positions, so tied exact
    values still receive distinct ranks in tie-break order.
    """
    if not values:
        raise DomainError("rank table needs at least one entry", reason="empty_table")
    rank_by_area = {a.area_id: a.origin_rank for a in areas}
    missing = sorted(set(values) - set(rank_by_area))
    if missing:
        raise DomainError(f"values name unknown areas: {', '.join(missing)}", reason="unknown_area")
    ordered = sorted(
        values.items(),
        key=lambda kv: (-kv[1].exact_value, rank_by_area[kv[0]], kv[0]),
    )
    rows = tuple(
        RankedRow(area_id=aid, metric=rate, rank=i) for i, (aid, rate) in enumerate(ordered, 1)
    )
    return RankedTable(group=group, metric_kind=metric_kind, rows=rows)


class Divergence(str, Enum):
    UP = "up"
    DOWN = "down"
    ALIGNED = "aligned"
    NONE = "none"


GLYPHS = {Divergence.UP: "▲", Divergence.DOWN: "▼", Divergence.ALIGNED: "◀→", Divergence.NONE: ""}


@dataclass(frozen=True)
class DivergenceMarker:
    area_id: str
    marker: Divergence
    rank_delta: int

    @property
    def glyph(self) -> str:
        return GLYPHS[self.marker]


def divergence_markers(
    identifiability_table: RankedTable,
    familiarity_table: RankedTable,
    threshold: int = 2,
    flagged: Optional[Iterable[str]] = None,
) -> list[DivergenceMarker]:
    """Compare familiarity rank against identifiability rank per area.

    rank_delta = familiarity rank minus identifiability rank. A positive delta
    at or past the threshold means the area is recognized better than raw
    exposure predicts (Up); a negative one means familiarity outruns
    recognition (Down). Areas inside the threshold are Aligned when flagged
    for display (default: all), otherwise None.
    """
    if threshold < 1:
        raise DomainError("threshold must be ≥ 1", reason="bad_threshold")
    left = {row.area_id for row in identifiability_table.rows}
    right = {row.area_id for row in familiarity_table.rows}
    if left != right:
        diff = sorted(left.symmetric_difference(right))
        raise DomainError(f"tables cover different areas: {', '.join(diff)}", reason="table_mismatch")
    flagged_set = set(flagged) if flagged is not None else set(left)
    markers = []
    for row in identifiability_table.rows:
        delta = familiarity_table.rank_of(row.area_id) - row.rank
        if delta >= threshold:
            marker = Divergence.UP
        elif delta <= -threshold:
            marker = Divergence.DOWN
        elif row.area_id in flagged_set:
            marker = Divergence.ALIGNED
        else:
            marker = Divergence.NONE
        markers.append(DivergenceMarker(area_id=row.area_id, marker=marker, rank_delta=delta))
    return markers
