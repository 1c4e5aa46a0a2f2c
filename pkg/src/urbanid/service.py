"""Participant session state machine and the HTTP API over it.

StudyService is the framework-free core: it owns phase gating, loop
counters, and report access, persisting domain facts through the event
store. create_app wraps it in a FastAPI application whose error bodies
always carry a machine-readable reason code.
"""

from __future__ import annotations

import random
import secrets
from datetime import datetime, timezone
from typing import Mapping, Optional

from .design import StudyDefinition, validate_study_definition
from .metrics import BlankPolicy
from .model import (
    DomainError,
    FamiliarityLevel,
    Phase,
    SequenceResponse,
)
from .report import build_report, render_json
from .semantic import SemanticLexicon
from .store import EventStore, _parse_participant

import json


class StudyService:
    """Serialized mutations per participant; reports read the snapshot."""

    def __init__(self, store: EventStore, lexicon: Optional[SemanticLexicon] = None):
        self.store = store
        self.lexicon = lexicon
        self._study_of: dict[str, str] = {}
        #: in-memory viewing counters; loops are client-reported telemetry,
        #: not durable domain facts, so they do not enter the event log
        self._fam_loops: dict[str, dict[str, int]] = {}
        self._depth_loops: dict[str, dict[str, int]] = {}
        self._phase_started: dict[str, str] = {}
        for study_id in store.studies():
            for pid in store.snapshot(study_id).participants:
                self._adopt(pid, study_id)

    def _adopt(self, pid: str, study_id: str) -> None:
        self._study_of[pid] = study_id
        self._fam_loops.setdefault(pid, {})
        self._depth_loops.setdefault(pid, {})
        self._phase_started.setdefault(pid, "")

    # ------------------------------------------------------------ admin

    def create_study(self, definition_data: Mapping) -> dict:
        definition = StudyDefinition.from_dict(definition_data)
        report = validate_study_definition(definition)
        if not report.passed:
            first = report.failures()[0]
            raise DomainError(f"invalid study definition: {first.message}", reason=first.code)
        self.store.create_study(definition)
        return {
            "study_id": definition.study_id,
            "sequence_ids": [m.sequence_id for m in definition.stimuli],
            "warnings": [f.message for f in report.findings if f.severity.value == "warning"],
        }

    def register_participant(self, study_id: str, attrs: Mapping) -> dict:
        self.store.snapshot(study_id)
        pid = attrs.get("participant_id") or f"pt-{secrets.token_hex(8)}"
        if pid in self._study_of:
            raise DomainError(f"duplicate participant_id: {pid}", reason="duplicate_participant")
        record = _parse_participant({**attrs, "participant_id": pid})
        self.store.register_participant(study_id, record)
        self._adopt(pid, study_id)
        self._phase_started[pid] = _now()
        return self.get_session(pid)

    # ------------------------------------------------------------ sessions

    def _locate(self, pid: str):
        study_id = self._study_of.get(pid)
        if study_id is None:
            raise DomainError(f"unknown participant: {pid}", reason="unknown_participant")
        return study_id, self.store.snapshot(study_id)

    def sequence_order(self, pid: str) -> list[str]:
        """Per-participant presentation order: a seeded shuffle, stable for
        the participant's whole session."""
        study_id, snapshot = self._locate(pid)
        order = [m.sequence_id for m in snapshot.definition.stimuli]
        random.Random(f"order:{pid}").shuffle(order)
        return order

    def get_session(self, pid: str) -> dict:
        study_id, snapshot = self._locate(pid)
        phase = snapshot.phases.get(pid, Phase.PRE_VIEWING)
        order = self.sequence_order(pid)
        responded = sorted(seq for (p, seq) in snapshot.responses if p == pid)
        current = None
        if phase is Phase.IN_DEPTH:
            current = next((s for s in order if s not in responded), None)
        fam = self._fam_loops.get(pid, {})
        schedule = snapshot.definition.schedule
        return {
            "participant_id": pid,
            "study_id": study_id,
            "phase": phase.value,
            "phase_started_at": self._phase_started.get(pid, ""),
            "sequence_order": order,
            "familiarity_submitted": bool(snapshot.participants[pid].familiarity_profile),
            "familiarization_loops": {s: fam.get(s, 0) for s in order},
            "familiarization_loops_completed": min((fam.get(s, 0) for s in order), default=0),
            "familiarization_target": schedule.familiarization_loops,
            "in_depth_loops": {s: self._depth_loops.get(pid, {}).get(s, 0) for s in order},
            "in_depth_loop_target": schedule.in_depth_loops_per_sequence,
            "current_sequence": current,
            "responses_submitted": responded,
        }

    def submit_familiarity(self, pid: str, profile_data: Mapping[str, str]) -> dict:
        study_id, snapshot = self._locate(pid)
        phase = snapshot.phases.get(pid, Phase.PRE_VIEWING)
        if phase is not Phase.PRE_VIEWING:
            raise DomainError(
                f"familiarity was already collected; session is in {phase.value}",
                reason="wrong_phase",
            )
        try:
            profile = {area: FamiliarityLevel(level) for area, level in profile_data.items()}
        except ValueError as exc:
            raise DomainError(f"unknown familiarity level: {exc}", reason="bad_level") from None
        self.store.submit_familiarity(study_id, pid, profile)
        self.store.advance_phase(study_id, pid, Phase.FAMILIARIZATION)
        self._phase_started[pid] = _now()
        return self.get_session(pid)

    def record_loop(self, pid: str, sequence_id: str) -> dict:
        study_id, snapshot = self._locate(pid)
        phase = snapshot.phases.get(pid, Phase.PRE_VIEWING)
        if sequence_id not in snapshot.definition.truth():
            raise DomainError(f"unknown sequence: {sequence_id}", reason="unknown_sequence")
        if phase is Phase.FAMILIARIZATION:
            counters = self._fam_loops.setdefault(pid, {})
        elif phase is Phase.IN_DEPTH:
            counters = self._depth_loops.setdefault(pid, {})
        else:
            raise DomainError(
                f"loops are only recorded during viewing phases, session is in {phase.value}",
                reason="wrong_phase",
            )
        counters[sequence_id] = counters.get(sequence_id, 0) + 1
        return self.get_session(pid)

    def advance_phase(self, pid: str) -> dict:
        study_id, snapshot = self._locate(pid)
        phase = snapshot.phases.get(pid, Phase.PRE_VIEWING)
        schedule = snapshot.definition.schedule
        if phase is Phase.PRE_VIEWING:
            raise DomainError("submit the familiarity profile to begin", reason="familiarity_required")
        if phase is Phase.FAMILIARIZATION:
            fam = self._fam_loops.get(pid, {})
            short = [
                s for s in sorted(snapshot.definition.truth())
                if fam.get(s, 0) < schedule.familiarization_loops
            ]
            if short:
                raise DomainError(
                    "familiarization incomplete, sequences below "
                    f"{schedule.familiarization_loops} loops: {', '.join(short)}",
                    reason="gate_unmet",
                )
            self.store.advance_phase(study_id, pid, Phase.IN_DEPTH)
        elif phase is Phase.IN_DEPTH:
            missing = [
                s for s in sorted(snapshot.definition.truth())
                if (pid, s) not in snapshot.responses
            ]
            if missing:
                raise DomainError(
                    f"responses missing for: {', '.join(missing)}", reason="gate_unmet"
                )
            self.store.advance_phase(study_id, pid, Phase.COMPLETE)
        else:
            raise DomainError("session is already complete", reason="wrong_phase")
        self._phase_started[pid] = _now()
        return self.get_session(pid)

    def submit_response(self, pid: str, body: Mapping) -> dict:
        study_id, snapshot = self._locate(pid)
        phase = snapshot.phases.get(pid, Phase.PRE_VIEWING)
        if phase is not Phase.IN_DEPTH:
            raise DomainError(
                f"responses are collected in the in-depth phase, session is in {phase.value}",
                reason="wrong_phase",
            )
        sequence_id = body.get("sequence_id", "")
        loops = body.get("loops_viewed")
        if loops is None:
            loops = self._depth_loops.get(pid, {}).get(sequence_id, 0)
        response = SequenceResponse(
            participant_id=pid,
            sequence_id=sequence_id,
            guessed_area_id=body.get("guessed_area_id"),
            q2_text=body.get("q2", ""),
            q3_text=body.get("q3", ""),
            q4_text=body.get("q4", ""),
            q5_text=body.get("q5", ""),
            loops_viewed=int(loops),
        )
        amend = (pid, sequence_id) in snapshot.responses
        self.store.record_response(study_id, response, amend=amend)
        warnings = []
        if response.loops_viewed < snapshot.definition.schedule.in_depth_loops_per_sequence:
            warnings.append("below_loop_target")
        if not amend and all(
            (pid, s) in snapshot.responses for s in snapshot.definition.truth()
        ):
            self.store.advance_phase(study_id, pid, Phase.COMPLETE)
            self._phase_started[pid] = _now()
        session = self.get_session(pid)
        session["warnings"] = warnings
        session["amended"] = amend
        return session

    # ------------------------------------------------------------ reading

    def get_report(
        self,
        study_id: str,
        kind: str,
        group: str = "general",
        policy: str = "exclude",
        threshold: int = 2,
        k: int = 3,
    ) -> dict:
        snapshot = self.store.snapshot(study_id)
        try:
            policy_value = BlankPolicy(policy)
        except ValueError:
            raise DomainError(f"unknown blank policy: {policy}", reason="bad_policy") from None
        doc = build_report(
            snapshot, kind, group, policy=policy_value, threshold=threshold, k=k, lexicon=self.lexicon
        )
        return json.loads(render_json(doc))

    def get_stimulus(self, study_id: str, sequence_id: str) -> dict:
        snapshot = self.store.snapshot(study_id)
        for m in snapshot.definition.stimuli:
            if m.sequence_id == sequence_id:
                return {
                    "sequence_id": m.sequence_id,
                    "area_id": m.area_id,
                    "media_uri": m.media_uri,
                    "duration_s": m.duration_s,
                    "frame_count": m.frame_count,
                    "nominal_fps": m.nominal_fps,
                    "denoising_strength": m.denoising_strength,
                }
        raise DomainError(f"unknown sequence: {sequence_id}", reason="unknown_sequence")

    def list_stimuli(self, study_id: str) -> list[dict]:
        snapshot = self.store.snapshot(study_id)
        return [self.get_stimulus(study_id, m.sequence_id) for m in snapshot.definition.stimuli]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


#: DomainError reason → HTTP status. Everything else maps to 400.
_STATUS_BY_REASON = {
    "unknown_study": 404,
    "unknown_participant": 404,
    "unknown_sequence": 404,
    "unknown_report_kind": 404,
    "duplicate_study": 409,
    "duplicate_participant": 409,
    "duplicate_response": 409,
    "wrong_phase": 409,
    "gate_unmet": 409,
    "familiarity_required": 409,
    "phase_order": 409,
}


def create_app(service: StudyService):
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    app = FastAPI(title="urban identity study service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(DomainError)
    async def domain_error_handler(request: Request, exc: DomainError):
        status = _STATUS_BY_REASON.get(exc.reason, 400)
        return JSONResponse(status_code=status, content={"reason": exc.reason, "detail": str(exc)})

    @app.post("/studies", status_code=201)
    async def create_study(body: dict):
        return service.create_study(body.get("definition", body))

    @app.post("/studies/{study_id}/participants", status_code=201)
    async def register_participant(study_id: str, body: dict):
        return service.register_participant(study_id, body)

    @app.get("/sessions/{pid}")
    async def get_session(pid: str):
        return service.get_session(pid)

    @app.post("/sessions/{pid}/familiarity")
    async def submit_familiarity(pid: str, body: dict):
        return service.submit_familiarity(pid, body.get("profile", body))

    @app.post("/sessions/{pid}/loops")
    async def record_loop(pid: str, body: dict):
        return service.record_loop(pid, body.get("sequence_id", ""))

    @app.post("/sessions/{pid}/advance")
    async def advance_phase(pid: str):
        return service.advance_phase(pid)

    @app.post("/sessions/{pid}/responses")
    async def submit_response(pid: str, body: dict):
        return service.submit_response(pid, body)

    @app.get("/studies/{study_id}/reports/{kind}")
    async def get_report(
        study_id: str,
        kind: str,
        group: str = "general",
        policy: str = "exclude",
        threshold: int = 2,
        k: int = 3,
    ):
        return service.get_report(study_id, kind, group=group, policy=policy, threshold=threshold, k=k)

    @app.get("/studies/{study_id}/stimuli")
    async def list_stimuli(study_id: str):
        return service.list_stimuli(study_id)

    @app.get("/studies/{study_id}/stimuli/{sequence_id}")
    async def get_stimulus(study_id: str, sequence_id: str):
        return service.get_stimulus(study_id, sequence_id)

    return app
