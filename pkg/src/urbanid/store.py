"""Append-only event log with replayed snapshots, plus bulk import/export.

One JSON record per line, UTF-8. The log is the single source of truth;
snapshots are a pure function of the log prefix. Timestamps live on events
only, so snapshot equality is time-independent.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .design import StudyDefinition, validate_study_definition
from .model import (
    DomainError,
    FamiliarityLevel,
    GENERAL,
    ParticipantGroup,
    ParticipantRecord,
    Phase,
    ResidenceBucket,
    SequenceResponse,
    validate_profile,
)


class EventKind(str, Enum):
    STUDY_CREATED = "StudyCreated"
    PARTICIPANT_REGISTERED = "ParticipantRegistered"
    FAMILIARITY_SUBMITTED = "FamiliaritySubmitted"
    PHASE_ADVANCED = "PhaseAdvanced"
    RESPONSE_SUBMITTED = "ResponseSubmitted"
    RESPONSE_AMENDED = "ResponseAmended"


@dataclass(frozen=True)
class EventRecord:
    event_id: int
    kind: EventKind
    payload: Mapping
    recorded_at: str


@dataclass
class StudySnapshot:
    """Materialized study state. Equality ignores event timestamps entirely."""

    definition: StudyDefinition
    participants: dict[str, ParticipantRecord] = field(default_factory=dict)
    phases: dict[str, Phase] = field(default_factory=dict)
    responses: dict[tuple[str, str], SequenceResponse] = field(default_factory=dict)

    def response_list(self) -> list[SequenceResponse]:
        """Final responses in canonical (participant_id, sequence_id) order."""
        return [self.responses[key] for key in sorted(self.responses)]

    def member_ids(self, group: str) -> list[str]:
        """Participant ids for a group selector, registration order preserved."""
        if group == GENERAL:
            return list(self.participants)
        try:
            wanted = ParticipantGroup(group)
        except ValueError:
            raise DomainError(f"unknown group selector: {group}", reason="unknown_group") from None
        return [pid for pid, p in self.participants.items() if p.group is wanted]


def _require(payload: Mapping, keys: Sequence[str], kind: EventKind) -> None:
    missing = [k for k in keys if k not in payload]
    if missing:
        raise DomainError(
            f"{kind.value} payload missing fields: {', '.join(missing)}", reason="bad_payload"
        )


def _parse_participant(payload: Mapping) -> ParticipantRecord:
    try:
        group = ParticipantGroup(payload["group"])
    except ValueError:
        raise DomainError(f"unknown group: {payload['group']!r}", reason="unknown_group") from None
    bucket = payload.get("residence_bucket")
    if bucket is not None:
        try:
            bucket = ResidenceBucket(bucket)
        except ValueError:
            raise DomainError(f"unknown residence bucket: {bucket!r}", reason="bad_payload") from None
    age = payload.get("age")
    if age is not None:
        age = int(age)
    return ParticipantRecord(
        participant_id=payload["participant_id"],
        group=group,
        age=age,
        residence_bucket=bucket,
        profession=payload.get("profession"),
        ai_familiarity=payload.get("ai_familiarity"),
    )


def _parse_response(payload: Mapping) -> SequenceResponse:
    return SequenceResponse(
        participant_id=payload["participant_id"],
        sequence_id=payload["sequence_id"],
        guessed_area_id=payload.get("guessed_area_id"),
        q2_text=payload.get("q2", ""),
        q3_text=payload.get("q3", ""),
        q4_text=payload.get("q4", ""),
        q5_text=payload.get("q5", ""),
        loops_viewed=int(payload.get("loops_viewed", 0)),
    )


class EventStore:
    """Single-writer append log. Pass ``path=None`` for an in-memory store."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else None
        self.events: list[EventRecord] = []
        self._snapshots: dict[str, StudySnapshot] = {}
        if self.path is not None and self.path.exists():
            self._replay_file()

    # ------------------------------------------------------------ loading

    def _replay_file(self) -> None:
        text = self.path.read_text("utf-8")
        raw_lines = text.splitlines()
        for lineno, line in enumerate(raw_lines, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError:
                if lineno == len(raw_lines):
                    warnings.warn(f"ignoring torn final log line {lineno} in {self.path}")
                    # drop the torn tail so the next append starts a clean line
                    keep = text.rfind("\n") + 1 if "\n" in text else 0
                    with self.path.open("rb+") as fh:
                        fh.truncate(len(text[:keep].encode("utf-8")))
                    return
                raise DomainError(
                    f"corrupt event log line {lineno} in {self.path}", reason="corrupt_log"
                ) from None
            try:
                kind = EventKind(data["kind"])
                payload = data["payload"]
                recorded_at = data.get("recorded_at", "")
            except (KeyError, ValueError, TypeError):
                raise DomainError(
                    f"corrupt event log line {lineno} in {self.path}", reason="corrupt_log"
                ) from None
            self._validate(kind, payload)
            record = EventRecord(
                event_id=len(self.events) + 1, kind=kind, payload=payload, recorded_at=recorded_at
            )
            self.events.append(record)
            self._apply(record)

    # ------------------------------------------------------------ appending

    def append(self, kind: EventKind, payload: Mapping) -> int:
        """Validate, persist, and apply one event. Returns its event_id."""
        self._validate(kind, payload)
        record = EventRecord(
            event_id=len(self.events) + 1,
            kind=kind,
            payload=payload,
            recorded_at=datetime.now(timezone.utc).isoformat(),
        )
        if self.path is not None:
            line = json.dumps(
                {"event_id": record.event_id, "kind": kind.value, "payload": payload,
                 "recorded_at": record.recorded_at},
                ensure_ascii=False,
                sort_keys=True,
            )
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
        self.events.append(record)
        self._apply(record)
        return record.event_id

    def _study(self, payload: Mapping) -> StudySnapshot:
        study_id = payload.get("study_id")
        snap = self._snapshots.get(study_id)
        if snap is None:
            raise DomainError(f"unknown study: {study_id}", reason="unknown_study")
        return snap

    def _validate(self, kind: EventKind, payload: Mapping) -> None:
        if kind is EventKind.STUDY_CREATED:
            _require(payload, ("study_id", "definition"), kind)
            if payload["study_id"] in self._snapshots:
                raise DomainError(f"study already exists: {payload['study_id']}", reason="duplicate_study")
            defn = StudyDefinition.from_dict(payload["definition"])
            if defn.study_id != payload["study_id"]:
                raise DomainError("study_id does not match definition", reason="bad_payload")
            report = validate_study_definition(defn)
            if not report.passed:
                first = report.failures()[0]
                raise DomainError(f"invalid study definition: {first.message}", reason=first.code)
            return

        if kind is EventKind.PARTICIPANT_REGISTERED:
            _require(payload, ("study_id", "participant_id", "group"), kind)
            snap = self._study(payload)
            if payload["participant_id"] in snap.participants:
                raise DomainError(
                    f"duplicate participant_id: {payload['participant_id']}",
                    reason="duplicate_participant",
                )
            _parse_participant(payload)
            return

        snap = self._study(payload)
        _require(payload, ("study_id", "participant_id"), kind)
        pid = payload["participant_id"]
        if pid not in snap.participants:
            raise DomainError(f"unknown participant: {pid}", reason="unknown_participant")

        if kind is EventKind.FAMILIARITY_SUBMITTED:
            _require(payload, ("profile",), kind)
            profile = {
                area: FamiliarityLevel(level) for area, level in payload["profile"].items()
            }
            validate_profile(profile, snap.definition.areas)
        elif kind is EventKind.PHASE_ADVANCED:
            _require(payload, ("phase",), kind)
            try:
                target = Phase(payload["phase"])
            except ValueError:
                raise DomainError(f"unknown phase: {payload['phase']!r}", reason="bad_payload") from None
            current = snap.phases.get(pid, Phase.PRE_VIEWING)
            if target is not current.successor:
                raise DomainError(
                    f"phase can only advance from {current.value} to "
                    f"{current.successor.value if current.successor else 'nowhere'}, got {target.value}",
                    reason="phase_order",
                )
        elif kind in (EventKind.RESPONSE_SUBMITTED, EventKind.RESPONSE_AMENDED):
            _require(payload, ("sequence_id",), kind)
            seq = payload["sequence_id"]
            truth = snap.definition.truth()
            if seq not in truth:
                raise DomainError(f"unknown sequence: {seq}", reason="unknown_sequence")
            guess = payload.get("guessed_area_id")
            if guess is not None and guess not in set(snap.definition.area_ids()):
                raise DomainError(f"unknown area: {guess}", reason="unknown_area")
            exists = (pid, seq) in snap.responses
            if kind is EventKind.RESPONSE_SUBMITTED and exists:
                raise DomainError(
                    f"{pid} already has a final response for {seq}; amend instead",
                    reason="duplicate_response",
                )
            if kind is EventKind.RESPONSE_AMENDED and not exists:
                raise DomainError(
                    f"{pid} has no response for {seq} to amend", reason="no_response_to_amend"
                )

    def _apply(self, record: EventRecord) -> None:
        payload = record.payload
        if record.kind is EventKind.STUDY_CREATED:
            defn = StudyDefinition.from_dict(payload["definition"])
            self._snapshots[payload["study_id"]] = StudySnapshot(definition=defn)
            return
        snap = self._snapshots[payload["study_id"]]
        pid = payload.get("participant_id")
        if record.kind is EventKind.PARTICIPANT_REGISTERED:
            snap.participants[pid] = _parse_participant(payload)
            snap.phases[pid] = Phase.PRE_VIEWING
        elif record.kind is EventKind.FAMILIARITY_SUBMITTED:
            profile = {a: FamiliarityLevel(v) for a, v in payload["profile"].items()}
            snap.participants[pid] = snap.participants[pid].with_profile(profile)
        elif record.kind is EventKind.PHASE_ADVANCED:
            snap.phases[pid] = Phase(payload["phase"])
        elif record.kind in (EventKind.RESPONSE_SUBMITTED, EventKind.RESPONSE_AMENDED):
            response = _parse_response(payload)
            snap.responses[(pid, response.sequence_id)] = response

    # ------------------------------------------------------------ reading

    def studies(self) -> list[str]:
        return list(self._snapshots)

    def snapshot(self, study_id: str) -> StudySnapshot:
        snap = self._snapshots.get(study_id)
        if snap is None:
            raise DomainError(f"unknown study: {study_id}", reason="unknown_study")
        return snap

    # ------------------------------------------------------------ typed wrappers

    def create_study(self, definition: StudyDefinition) -> str:
        self.append(
            EventKind.STUDY_CREATED,
            {"study_id": definition.study_id, "definition": definition.to_dict()},
        )
        return definition.study_id

    def register_participant(self, study_id: str, record: ParticipantRecord) -> str:
        payload = {
            "study_id": study_id,
            "participant_id": record.participant_id,
            "group": record.group.value,
        }
        if record.age is not None:
            payload["age"] = record.age
        if record.residence_bucket is not None:
            payload["residence_bucket"] = record.residence_bucket.value
        if record.profession is not None:
            payload["profession"] = record.profession
        if record.ai_familiarity is not None:
            payload["ai_familiarity"] = record.ai_familiarity
        self.append(EventKind.PARTICIPANT_REGISTERED, payload)
        return record.participant_id

    def submit_familiarity(
        self, study_id: str, participant_id: str, profile: Mapping[str, FamiliarityLevel]
    ) -> None:
        self.append(
            EventKind.FAMILIARITY_SUBMITTED,
            {
                "study_id": study_id,
                "participant_id": participant_id,
                "profile": {area: level.value for area, level in profile.items()},
            },
        )

    def advance_phase(self, study_id: str, participant_id: str, phase: Phase) -> None:
        self.append(
            EventKind.PHASE_ADVANCED,
            {"study_id": study_id, "participant_id": participant_id, "phase": phase.value},
        )

    def record_response(self, study_id: str, response: SequenceResponse, amend: bool = False) -> None:
        kind = EventKind.RESPONSE_AMENDED if amend else EventKind.RESPONSE_SUBMITTED
        self.append(
            kind,
            {
                "study_id": study_id,
                "participant_id": response.participant_id,
                "sequence_id": response.sequence_id,
                "guessed_area_id": response.guessed_area_id,
                "q2": response.q2_text,
                "q3": response.q3_text,
                "q4": response.q4_text,
                "q5": response.q5_text,
                "loops_viewed": response.loops_viewed,
            },
        )


# ---------------------------------------------------------------- import / export

RESPONSE_COLUMNS = ("participant_id", "group", "sequence_id", "guessed_area_id", "q2", "q3", "q4", "q5")


@dataclass(frozen=True)
class RejectedRow:
    row: int
    reason: str


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: list[RejectedRow] = field(default_factory=list)

    def merged(self, other: "IngestReport") -> "IngestReport":
        return IngestReport(
            accepted=self.accepted + other.accepted, rejected=self.rejected + other.rejected
        )


def _ingest_response_row(
    store: EventStore, study_id: str, row: Mapping, rowno: int, report: IngestReport
) -> None:
    snap = store.snapshot(study_id)
    pid = (row.get("participant_id") or "").strip()
    group_raw = (row.get("group") or "").strip()
    if not pid:
        report.rejected.append(RejectedRow(rowno, "missing participant_id"))
        return
    try:
        group = ParticipantGroup(group_raw)
    except ValueError:
        report.rejected.append(RejectedRow(rowno, f"unknown group: {group_raw!r}"))
        return
    existing = snap.participants.get(pid)
    if existing is not None and existing.group is not group:
        report.rejected.append(
            RejectedRow(rowno, f"participant {pid} already registered as {existing.group.value}")
        )
        return
    guess = (row.get("guessed_area_id") or "").strip() or None
    payload = {
        "study_id": study_id,
        "participant_id": pid,
        "sequence_id": (row.get("sequence_id") or "").strip(),
        "guessed_area_id": guess,
        "q2": row.get("q2") or "",
        "q3": row.get("q3") or "",
        "q4": row.get("q4") or "",
        "q5": row.get("q5") or "",
    }
    if "loops_viewed" in row and row["loops_viewed"] not in (None, ""):
        payload["loops_viewed"] = int(row["loops_viewed"])
    try:
        if existing is None:
            store.register_participant(study_id, ParticipantRecord(participant_id=pid, group=group))
        store.append(EventKind.RESPONSE_SUBMITTED, payload)
    except DomainError as exc:
        report.rejected.append(RejectedRow(rowno, str(exc)))
        return
    report.accepted += 1


def _ingest_participant_record(
    store: EventStore, study_id: str, data: Mapping, rowno: int, report: IngestReport
) -> None:
    try:
        record = _parse_participant(data)
        store.register_participant(study_id, record)
        familiarity = data.get("familiarity")
        if familiarity:
            profile = {a: FamiliarityLevel(v) for a, v in familiarity.items()}
            store.submit_familiarity(study_id, record.participant_id, profile)
    except (DomainError, KeyError, ValueError, TypeError) as exc:
        report.rejected.append(RejectedRow(rowno, str(exc)))
        return
    report.accepted += 1


def import_responses(store: EventStore, study_id: str, text: str, fmt: str) -> IngestReport:
    """Ingest a bulk file. ``fmt`` is ``csv`` (header row, response columns)
    or ``jsonl`` (one object per line; ``{"record": "participant", ...}``
    rows register participants with optional familiarity, all other rows are
    responses). Each row is accepted or rejected independently.
    """
    report = IngestReport()
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raise DomainError("csv file has no header row", reason="bad_file")
        missing = [c for c in RESPONSE_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise DomainError(f"csv header missing columns: {', '.join(missing)}", reason="bad_file")
        for rowno, row in enumerate(reader, 2):
            _ingest_response_row(store, study_id, row, rowno, report)
    elif fmt == "jsonl":
        for rowno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError:
                report.rejected.append(RejectedRow(rowno, "invalid JSON"))
                continue
            if data.get("record") == "participant":
                _ingest_participant_record(store, study_id, data, rowno, report)
            else:
                _ingest_response_row(store, study_id, data, rowno, report)
    else:
        raise DomainError(f"unknown import format: {fmt}", reason="bad_format")
    return report


def export_responses(snapshot: StudySnapshot, fmt: str = "csv") -> str:
    """Canonical response export: rows sorted by (participant_id, sequence_id).

    The column set mirrors the import format, so export → import round-trips.
    """
    rows = []
    for response in snapshot.response_list():
        participant = snapshot.participants[response.participant_id]
        rows.append(
            {
                "participant_id": response.participant_id,
                "group": participant.group.value,
                "sequence_id": response.sequence_id,
                "guessed_area_id": response.guessed_area_id or "",
                "q2": response.q2_text,
                "q3": response.q3_text,
                "q4": response.q4_text,
                "q5": response.q5_text,
            }
        )
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=RESPONSE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return out.getvalue()
    if fmt == "jsonl":
        lines = []
        for row in rows:
            row = dict(row)
            row["guessed_area_id"] = row["guessed_area_id"] or None
            lines.append(json.dumps(row, ensure_ascii=False, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")
    raise DomainError(f"unknown export format: {fmt}", reason="bad_format")
