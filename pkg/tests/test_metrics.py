from fractions import Fraction

import pytest

from urbanid.metrics import (
    AccuracyInputs,
    BlankPolicy,
    Divergence,
    MetricKind,
    RatePercent,
    accuracy_histogram,
    accuracy_per_participant,
    accuracy_rate,
    cohort_mean_accuracy,
    display_percent,
    divergence_markers,
    familiarity_rate,
    rank_table,
    sequence_accuracy,
)
from urbanid.model import DomainError, FamiliarityLevel, SequenceResponse, StudyArea

L = FamiliarityLevel


def test_display_percent_rounds_half_away_from_zero():
    # 4.5 and 5.5 both round up; round() would send 4.5 down
    assert display_percent(Fraction(9, 200)) == 5
    assert display_percent(Fraction(11, 200)) == 6
    assert display_percent(Fraction(1, 3)) == 33
    assert display_percent(Fraction(2, 3)) == 67
    assert display_percent(Fraction(0)) == 0
    assert display_percent(Fraction(1)) == 100


def test_display_percent_does_not_round_twice():
    # 0.4445 -> 44.45 -> 44, not 44.45 -> 44.5 -> 45
    assert display_percent(Fraction(4445, 10000)) == 44


def test_rate_percent_rejects_out_of_range():
    with pytest.raises(DomainError) as exc:
        RatePercent.from_fraction(Fraction(101, 100))
    assert exc.value.reason == "rate_out_of_range"
    with pytest.raises(DomainError):
        RatePercent.from_fraction(Fraction(-1, 100))


def test_familiarity_rate_worked_example():
    # hand sum: 8*1 + 6*0.7 + 4*0.4 + 2*0 = 13.8 over 20 -> 0.69
    levels = [L.CONTINUOUS_RESIDENCE] * 8 + [L.REGULAR_ATTENDANCE] * 6 + [L.QUICK_VISITS] * 4 + [L.NOT_FAMILIAR] * 2
    rate = familiarity_rate(levels)
    assert rate.exact_value == Fraction(69, 100)
    assert rate.display == 69


def test_familiarity_rate_endpoints():
    assert familiarity_rate([L.NOT_FAMILIAR] * 7).exact_value == 0
    assert familiarity_rate([L.CONTINUOUS_RESIDENCE] * 7).display == 100


def test_familiarity_rate_empty_group():
    with pytest.raises(DomainError) as exc:
        familiarity_rate([])
    assert exc.value.reason == "empty_group"


def test_accuracy_inputs_validation():
    with pytest.raises(DomainError):
        AccuracyInputs(correct_count=0, considered_count=0)
    with pytest.raises(DomainError):
        AccuracyInputs(correct_count=5, considered_count=4)
    with pytest.raises(DomainError):
        AccuracyInputs(correct_count=-1, considered_count=4)


def test_accuracy_rate_is_exact():
    rate = accuracy_rate(AccuracyInputs(5, 9))
    assert rate.exact_value == Fraction(5, 9)
    assert rate.display == 56  # 55.55.. rounds up
    assert accuracy_rate(AccuracyInputs(4, 9)).display == 44  # 44.44.. rounds down


TRUTH = {"s1": "a1", "s2": "a2", "s3": "a3"}


def _resp(pid, seq, guess):
    return SequenceResponse(pid, seq, guess)


def test_per_participant_blank_policies():
    rows = [_resp("p", "s1", "a1"), _resp("p", "s2", None), _resp("p", "s3", "a1")]
    # exclude: 1 correct of 2 considered
    rate, inputs = accuracy_per_participant(rows, "p", TRUTH, BlankPolicy.EXCLUDE)
    assert (inputs.correct_count, inputs.considered_count) == (1, 2)
    assert rate.exact_value == Fraction(1, 2)
    # incorrect: same numerator, denominator grows to 3
    rate, inputs = accuracy_per_participant(rows, "p", TRUTH, BlankPolicy.INCORRECT)
    assert (inputs.correct_count, inputs.considered_count) == (1, 3)


def test_all_blank_participant_is_unscorable_under_exclude():
    rows = [_resp("p", "s1", None), _resp("p", "s2", None)]
    with pytest.raises(DomainError) as exc:
        accuracy_per_participant(rows, "p", TRUTH, BlankPolicy.EXCLUDE)
    assert exc.value.reason == "empty_considered"
    rate, _ = accuracy_per_participant(rows, "p", TRUTH, BlankPolicy.INCORRECT)
    assert rate.exact_value == 0


def test_unknown_sequence_rejected():
    with pytest.raises(DomainError) as exc:
        accuracy_per_participant([_resp("p", "s9", "a1")], "p", TRUTH)
    assert exc.value.reason == "unknown_sequence"


def test_sequence_accuracy_filters_members():
    rows = [
        _resp("p1", "s1", "a1"),
        _resp("p2", "s1", "a2"),
        _resp("p3", "s1", "a1"),  # p3 not a member, must not count
    ]
    rate, inputs = sequence_accuracy(rows, "s1", ["p1", "p2"], TRUTH)
    assert (inputs.correct_count, inputs.considered_count) == (1, 2)
    assert rate.display == 50


def test_cohort_mean_pools_counts():
    # p1: 2/2, p2: 0/1 -> pooled 2/3, not mean of 100 and 0
    rows = [_resp("p1", "s1", "a1"), _resp("p1", "s2", "a2"), _resp("p2", "s3", "a1")]
    rate, inputs = cohort_mean_accuracy(rows, ["p1", "p2"], TRUTH)
    assert (inputs.correct_count, inputs.considered_count) == (2, 3)
    assert rate.exact_value == Fraction(2, 3)


def test_histogram_bins_by_display_value():
    rows = [
        _resp("p1", "s1", "a1"), _resp("p1", "s2", "a2"),   # 100
        _resp("p2", "s1", "a1"), _resp("p2", "s2", "a1"),   # 50
        _resp("p3", "s1", "a2"), _resp("p3", "s2", "a1"),   # 0
        _resp("p4", "s1", None), _resp("p4", "s2", None),   # unscorable under exclude
    ]
    bins = accuracy_histogram(rows, ["p1", "p2", "p3", "p4"], TRUTH)
    assert bins == {0: 1, 50: 1, 100: 1}
    assert sum(bins.values()) == 3
    assert list(bins) == sorted(bins)


AREAS = [StudyArea("a1", "One", 1), StudyArea("a2", "Two", 2), StudyArea("a3", "Three", 3)]


def _rates(**pct):
    return {aid: RatePercent.from_fraction(Fraction(v, 100)) for aid, v in pct.items()}


def test_rank_table_orders_by_exact_descending():
    table = rank_table(_rates(a1=50, a2=75, a3=25), MetricKind.SEQUENCE_ACCURACY, "general", AREAS)
    assert [r.area_id for r in table.rows] == ["a2", "a1", "a3"]
    assert [r.rank for r in table.rows] == [1, 2, 3]
    assert table.rank_of("a3") == 3


def test_rank_table_tie_breaks_by_origin_rank():
    # a2 and a3 tie on value; a2 has the lower origin rank so it comes first
    table = rank_table(_rates(a1=10, a2=60, a3=60), MetricKind.FAMILIARITY, "local", AREAS)
    assert [r.area_id for r in table.rows] == ["a2", "a3", "a1"]


def test_rank_table_ties_compare_exact_not_display():
    # 2/3 and 0.665 both display as 67 but are not tied
    values = {
        "a1": RatePercent.from_fraction(Fraction(2, 3)),
        "a2": RatePercent.from_fraction(Fraction(665, 1000)),
        "a3": RatePercent.from_fraction(Fraction(0)),
    }
    assert values["a1"].display == values["a2"].display == 67
    table = rank_table(values, MetricKind.SEQUENCE_ACCURACY, "general", AREAS)
    assert [r.area_id for r in table.rows] == ["a1", "a2", "a3"]


def test_rank_table_rejects_unknown_area():
    with pytest.raises(DomainError) as exc:
        rank_table(_rates(zz=10), MetricKind.FAMILIARITY, "general", AREAS)
    assert exc.value.reason == "unknown_area"


def _tables(ident_order, fam_order):
    ident = rank_table(
        _rates(**{aid: 90 - 10 * i for i, aid in enumerate(ident_order)}),
        MetricKind.SEQUENCE_ACCURACY, "general", AREAS,
    )
    fam = rank_table(
        _rates(**{aid: 90 - 10 * i for i, aid in enumerate(fam_order)}),
        MetricKind.FAMILIARITY, "general", AREAS,
    )
    return ident, fam


def test_divergence_deltas_and_markers():
    # a1: ident rank 1, fam rank 3 -> delta +2 -> up at threshold 2
    # a3: ident rank 3, fam rank 1 -> delta -2 -> down
    # a2: delta 0 -> aligned
    ident, fam = _tables(["a1", "a2", "a3"], ["a3", "a2", "a1"])
    markers = {m.area_id: m for m in divergence_markers(ident, fam, threshold=2)}
    assert markers["a1"].marker is Divergence.UP
    assert markers["a1"].rank_delta == 2
    assert markers["a1"].glyph == "▲"
    assert markers["a3"].marker is Divergence.DOWN
    assert markers["a3"].rank_delta == -2
    assert markers["a3"].glyph == "▼"
    assert markers["a2"].marker is Divergence.ALIGNED
    assert markers["a2"].glyph == "◀→"


def test_divergence_threshold_moves_boundary():
    ident, fam = _tables(["a1", "a2", "a3"], ["a3", "a2", "a1"])
    markers = {m.area_id: m.marker for m in divergence_markers(ident, fam, threshold=3)}
    # deltas of +-2 fall inside a threshold of 3
    assert markers["a1"] is Divergence.ALIGNED
    assert markers["a3"] is Divergence.ALIGNED


def test_divergence_flagged_gates_aligned_only():
    # up/down follow the delta alone; the flag decides aligned vs none
    ident, fam = _tables(["a1", "a2", "a3"], ["a3", "a2", "a1"])
    markers = {m.area_id: m for m in divergence_markers(ident, fam, threshold=2, flagged=["a1"])}
    assert markers["a1"].marker is Divergence.UP
    assert markers["a2"].marker is Divergence.NONE
    assert markers["a2"].glyph == ""
    assert markers["a3"].marker is Divergence.DOWN
    assert markers["a3"].rank_delta == -2


def test_divergence_rejects_mismatched_tables():
    ident, _ = _tables(["a1", "a2", "a3"], ["a3", "a2", "a1"])
    fam_small = rank_table(_rates(a1=10, a2=20), MetricKind.FAMILIARITY, "general", AREAS)
    with pytest.raises(DomainError) as exc:
        divergence_markers(ident, fam_small, threshold=2)
    assert exc.value.reason == "table_mismatch"


def test_divergence_rejects_bad_threshold():
    ident, fam = _tables(["a1", "a2", "a3"], ["a1", "a2", "a3"])
    with pytest.raises(DomainError) as exc:
        divergence_markers(ident, fam, threshold=0)
    assert exc.value.reason == "bad_threshold"
