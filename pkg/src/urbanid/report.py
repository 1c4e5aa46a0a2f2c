"""Report documents over a study snapshot: ranked metric tables with
divergence markers, semantic top-k tables, accuracy histograms, and cohort
demographics. One tabular body, three renders (json / csv / text); the json
and csv renders round-trip losslessly and carry no timestamps, so equal
snapshots produce byte-equal output.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .metrics import (
    BlankPolicy,
    Divergence,
    GLYPHS,
    MetricKind,
    RatePercent,
    accuracy_histogram,
    divergence_markers,
    familiarity_rate,
    rank_table,
    sequence_accuracy,
)
from .model import DomainError, GENERAL, GROUP_SELECTORS, UNSPECIFIED
from .semantic import DEFAULT_TEXT_FIELDS, SemanticLexicon, element_frequencies, load_starter_lexicon
from .store import StudySnapshot

REPORT_KINDS = ("metrics", "semantic", "demographics", "histogram")

#: Cell types the tabular body supports. frac cells hold exact rationals.
_CASTS = {
    "str": str,
    "int": int,
    "frac": lambda v: Fraction(v),
}


@dataclass(frozen=True)
class ReportDocument:
    kind: str
    group: str
    #: scalar options and derived facts; part of the canonical body
    meta: Mapping[str, object] = field(default_factory=dict)
    #: (column name, cell type) pairs; type ∈ {str, int, frac}
    columns: tuple[tuple[str, str], ...] = ()
    rows: tuple[Mapping[str, object], ...] = ()

    @property
    def insufficient(self) -> bool:
        return "insufficient_data" in self.meta


def _insufficient(kind: str, group: str, reason: str, meta: Optional[Mapping[str, object]] = None) -> ReportDocument:
    merged = dict(meta) if meta else {}
    merged["insufficient_data"] = reason
    return ReportDocument(kind=kind, group=group, meta=merged)


# ---------------------------------------------------------------- builders

def metrics_report(
    snapshot: StudySnapshot,
    group: str = GENERAL,
    policy: BlankPolicy = BlankPolicy.EXCLUDE,
    threshold: int = 2,
) -> ReportDocument:
    """Paired ranking of per-sequence accuracy and familiarity, with
    divergence markers comparing each area's position in the two orders."""
    if group not in GROUP_SELECTORS:
        raise DomainError(f"unknown group selector: {group}", reason="unknown_group")
    members = snapshot.member_ids(group)
    meta: dict[str, object] = {"policy": policy.value, "threshold": threshold}
    if not members:
        return _insufficient("metrics", group, "no participants in group", meta)
    responses = snapshot.response_list()
    truth = snapshot.definition.truth()
    accuracy: dict[str, RatePercent] = {}
    counts: dict[str, tuple[int, int]] = {}
    familiarity: dict[str, RatePercent] = {}
    for area in snapshot.definition.areas:
        seqs = [s for s, aid in truth.items() if aid == area.area_id]
        levels = [
            snapshot.participants[pid].familiarity_profile[area.area_id]
            for pid in members
            if area.area_id in snapshot.participants[pid].familiarity_profile
        ]
        if not seqs or not levels:
            continue
        try:
            rate, inputs = sequence_accuracy(responses, seqs[0], members, truth, policy)
        except DomainError:
            continue
        accuracy[area.area_id] = rate
        counts[area.area_id] = (inputs.correct_count, inputs.considered_count)
        familiarity[area.area_id] = familiarity_rate(levels)
    if not accuracy:
        return _insufficient("metrics", group, "no responses to score", meta)
    accuracy_table = rank_table(accuracy, MetricKind.SEQUENCE_ACCURACY, group, snapshot.definition.areas)
    familiarity_table = rank_table(familiarity, MetricKind.FAMILIARITY, group, snapshot.definition.areas)
    markers = {
        m.area_id: m for m in divergence_markers(accuracy_table, familiarity_table, threshold)
    }
    columns = (
        ("rank", "int"),
        ("area_by_accuracy", "str"),
        ("accuracy_pct", "int"),
        ("accuracy_exact", "frac"),
        ("correct", "int"),
        ("considered", "int"),
        ("accuracy_marker", "str"),
        ("accuracy_rank_delta", "int"),
        ("area_by_familiarity", "str"),
        ("familiarity_pct", "int"),
        ("familiarity_exact", "frac"),
        ("familiarity_marker", "str"),
        ("familiarity_rank_delta", "int"),
    )
    rows = []
    for acc_row, fam_row in zip(accuracy_table.rows, familiarity_table.rows):
        acc_mark = markers[acc_row.area_id]
        fam_mark = markers[fam_row.area_id]
        c, t = counts[acc_row.area_id]
        rows.append(
            {
                "rank": acc_row.rank,
                "area_by_accuracy": acc_row.area_id,
                "accuracy_pct": acc_row.metric.display,
                "accuracy_exact": acc_row.metric.exact_value,
                "correct": c,
                "considered": t,
                "accuracy_marker": acc_mark.marker.value,
                "accuracy_rank_delta": acc_mark.rank_delta,
                "area_by_familiarity": fam_row.area_id,
                "familiarity_pct": fam_row.metric.display,
                "familiarity_exact": fam_row.metric.exact_value,
                "familiarity_marker": fam_mark.marker.value,
                "familiarity_rank_delta": fam_mark.rank_delta,
            }
        )
    return ReportDocument(kind="metrics", group=group, meta=meta, columns=columns, rows=tuple(rows))


def semantic_report(
    snapshot: StudySnapshot,
    group: str = GENERAL,
    k: int = 3,
    lexicon: Optional[SemanticLexicon] = None,
    text_fields: Sequence[str] = DEFAULT_TEXT_FIELDS,
) -> ReportDocument:
    if group not in GROUP_SELECTORS:
        raise DomainError(f"unknown group selector: {group}", reason="unknown_group")
    if k < 1:
        raise DomainError("k must be ≥ 1", reason="bad_k")
    lexicon = lexicon if lexicon is not None else load_starter_lexicon()
    members = set(snapshot.member_ids(group))
    responses = [r for r in snapshot.response_list() if r.participant_id in members]
    meta: dict[str, object] = {"k": k, "lexicon_version": lexicon.version, "fields": "+".join(text_fields)}
    if not responses:
        return _insufficient("semantic", group, "no responses in group", meta)
    table = element_frequencies(responses, snapshot.definition.truth(), lexicon, text_fields).top_k(k)
    columns = (
        ("area", "str"),
        ("position", "int"),
        ("thematic_group", "str"),
        ("term", "str"),
        ("count", "int"),
    )
    rows = []
    for area in snapshot.definition.areas:
        for position, element in enumerate(table.by_area.get(area.area_id, ()), 1):
            rows.append(
                {
                    "area": area.area_id,
                    "position": position,
                    "thematic_group": element.group.value,
                    "term": element.canonical_term,
                    "count": element.count,
                }
            )
    return ReportDocument(kind="semantic", group=group, meta=meta, columns=columns, rows=tuple(rows))


def histogram_report(
    snapshot: StudySnapshot, group: str = GENERAL, policy: BlankPolicy = BlankPolicy.EXCLUDE
) -> ReportDocument:
    if group not in GROUP_SELECTORS:
        raise DomainError(f"unknown group selector: {group}", reason="unknown_group")
    members = snapshot.member_ids(group)
    meta: dict[str, object] = {"policy": policy.value}
    if not members:
        return _insufficient("histogram", group, "no participants in group", meta)
    bins = accuracy_histogram(snapshot.response_list(), members, snapshot.definition.truth(), policy)
    if not bins:
        return _insufficient("histogram", group, "no responses to score", meta)
    meta["participants_scored"] = sum(bins.values())
    columns = (("accuracy_pct", "int"), ("participants", "int"))
    rows = tuple({"accuracy_pct": pct, "participants": n} for pct, n in bins.items())
    return ReportDocument(kind="histogram", group=group, meta=meta, columns=columns, rows=rows)


def demographics_report(snapshot: StudySnapshot, group: str = GENERAL) -> ReportDocument:
    from .model import summarize_cohort

    if group not in GROUP_SELECTORS:
        raise DomainError(f"unknown group selector: {group}", reason="unknown_group")
    members = set(snapshot.member_ids(group))
    cohort = [p for pid, p in snapshot.participants.items() if pid in members]
    if not cohort:
        return _insufficient("demographics", group, "no participants in group")
    summary = summarize_cohort(cohort)
    meta: dict[str, object] = {"total": summary.total}
    columns = (("category", "str"), ("key", "str"), ("count", "int"))
    rows = []
    for key, count in summary.by_group.items():
        rows.append({"category": "group", "key": key, "count": count})
    for key, count in summary.by_residence.items():
        if key == UNSPECIFIED and count == 0:
            continue
        rows.append({"category": "residence", "key": key, "count": count})
    if summary.age_min is not None:
        rows.append({"category": "age", "key": "min", "count": summary.age_min})
        rows.append({"category": "age", "key": "max", "count": summary.age_max})
    return ReportDocument(kind="demographics", group=group, meta=meta, columns=columns, rows=tuple(rows))


def build_report(
    snapshot: StudySnapshot,
    kind: str,
    group: str = GENERAL,
    policy: BlankPolicy = BlankPolicy.EXCLUDE,
    threshold: int = 2,
    k: int = 3,
    lexicon: Optional[SemanticLexicon] = None,
) -> ReportDocument:
    if kind == "metrics":
        return metrics_report(snapshot, group, policy, threshold)
    if kind == "semantic":
        return semantic_report(snapshot, group, k, lexicon)
    if kind == "histogram":
        return histogram_report(snapshot, group, policy)
    if kind == "demographics":
        return demographics_report(snapshot, group)
    raise DomainError(f"unknown report kind: {kind}", reason="unknown_report_kind")


# ---------------------------------------------------------------- renders

def _cell_out(value: object) -> object:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return value


def render_json(doc: ReportDocument) -> str:
    body = {
        "kind": doc.kind,
        "group": doc.group,
        "meta": {k: _cell_out(v) for k, v in doc.meta.items()},
        "columns": [list(c) for c in doc.columns],
        "rows": [{k: _cell_out(v) for k, v in row.items()} for row in doc.rows],
    }
    return json.dumps(body, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def parse_json_render(text: str) -> ReportDocument:
    body = json.loads(text)
    columns = tuple((name, ctype) for name, ctype in body["columns"])
    types = dict(columns)
    rows = tuple(
        {name: _CASTS[types[name]](value) for name, value in row.items()} for row in body["rows"]
    )
    meta = {k: _meta_in(v) for k, v in body["meta"].items()}
    return ReportDocument(kind=body["kind"], group=body["group"], meta=meta, columns=columns, rows=rows)


def _meta_out(value: object) -> tuple[str, str]:
    if isinstance(value, Fraction):
        return "frac", f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return "int", str(value)
    return "str", str(value)


def _meta_in(value: object) -> object:
    # json meta values keep native types; frac comes back as "a/b" string
    if isinstance(value, str) and "/" in value and value.replace("/", "").replace("-", "").isdigit():
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            return value
    return value


def render_csv(doc: ReportDocument) -> str:
    """Delimited render: ``#key:type=value`` meta lines, then a typed header
    row (``name:type`` cells), then data rows."""
    out = io.StringIO()
    out.write(f"#kind:str={doc.kind}\n")
    out.write(f"#group:str={doc.group}\n")
    for key in sorted(doc.meta):
        ctype, encoded = _meta_out(doc.meta[key])
        out.write(f"#{key}:{ctype}={encoded}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([f"{name}:{ctype}" for name, ctype in doc.columns])
    for row in doc.rows:
        writer.writerow([_cell_out(row[name]) for name, _ in doc.columns])
    return out.getvalue()


def parse_csv_render(text: str) -> ReportDocument:
    meta: dict[str, object] = {}
    kind = group = ""
    lines = text.splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        key_part, _, raw = line[1:].partition("=")
        key, _, ctype = key_part.partition(":")
        value = _CASTS[ctype](raw)
        if key == "kind":
            kind = value
        elif key == "group":
            group = value
        else:
            meta[key] = value
    reader = csv.reader(io.StringIO("\n".join(lines[body_start:])))
    table = list(reader)
    if not table:
        return ReportDocument(kind=kind, group=group, meta=meta)
    columns = tuple(tuple(cell.rsplit(":", 1)) for cell in table[0])
    rows = tuple(
        {name: _CASTS[ctype](cell) for (name, ctype), cell in zip(columns, raw_row)}
        for raw_row in table[1:]
    )
    return ReportDocument(kind=kind, group=group, meta=meta, columns=columns, rows=rows)


def _marker_glyph(value: str) -> str:
    return GLYPHS[Divergence(value)]


def render_text(doc: ReportDocument) -> str:
    """Human-readable table. The metrics kind mirrors the paired
    accuracy/familiarity column layout with divergence arrows."""
    head = [f"{doc.kind} report ({doc.group})"]
    for key in sorted(doc.meta):
        head.append(f"  {key}: {doc.meta[key]}")
    if doc.insufficient:
        return "\n".join(head) + "\n"
    lines = ["", ""]
    if doc.kind == "metrics":
        lines = [
            "",
            f"  {'accuracy (%)':<34}familiarity (%)",
        ]
        for row in doc.rows:
            left = f"{row['area_by_accuracy']:<16}{row['accuracy_pct']:>4} {_marker_glyph(row['accuracy_marker']):<3}"
            right = f"{row['area_by_familiarity']:<16}{row['familiarity_pct']:>4} {_marker_glyph(row['familiarity_marker']):<3}"
            lines.append(f"  {left:<34}{right:<30}".rstrip())
    else:
        names = [name for name, _ in doc.columns]
        widths = {
            name: max(len(name), *(len(str(_cell_out(r[name]))) for r in doc.rows)) if doc.rows else len(name)
            for name in names
        }
        lines = ["", "  " + "  ".join(f"{name:<{widths[name]}}" for name in names)]
        for row in doc.rows:
            lines.append("  " + "  ".join(f"{str(_cell_out(row[name])):<{widths[name]}}" for name in names).rstrip())
    return "\n".join(head + lines) + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "text": render_text}


def render(doc: ReportDocument, fmt: str = "json") -> str:
    renderer = RENDERERS.get(fmt)
    if renderer is None:
        raise DomainError(f"unknown render format: {fmt}", reason="bad_format")
    return renderer(doc)
