"""Deterministic reference dataset generator.

Builds a complete synthetic study (definition, cohort, familiarity profiles,
324 responses with free text) whose computed metrics land exactly on the
reference study's published displays. The construction is a constraint
search, not a dump of hard-coded rows: per-area correct counts are turned
into a response matrix by a degree-sequence build, familiarity score totals
are decomposed into level multisets, and the free-text corpus carries exact
per-term mention counts. The search doubles as a consistency proof of the
targets; an unsatisfiable target raises instead of emitting skewed data.

The seed only varies filler wording and which wrong area an incorrect
response names. Every metric-bearing choice is seed-independent.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .design import PhaseSchedule, StimulusManifest, StudyDefinition, default_instrument
from .model import (
    DomainError,
    FamiliarityLevel,
    ParticipantGroup,
    ParticipantRecord,
    ResidenceBucket,
    SequenceResponse,
    StudyArea,
)
from .semantic import SemanticLexicon, ThematicGroup, load_starter_lexicon
from .store import EventKind, EventStore

STUDY_ID = "tokyo9-ref"

#: Areas in development-origin order, most organic first.
AREAS = (
    StudyArea("shimokitazawa", "Shimokitazawa", 1),
    StudyArea("harajuku", "Harajuku", 2),
    StudyArea("yanesen", "Yanesen", 3),
    StudyArea("kagurazaka", "Kagurazaka", 4),
    StudyArea("asakusa", "Asakusa", 5),
    StudyArea("ueno", "Ueno", 6),
    StudyArea("shibuya", "Shibuya", 7),
    StudyArea("ikebukuro", "Ikebukuro", 8),
    StudyArea("roppongi", "Roppongi", 9),
)

AREA_IDS = tuple(a.area_id for a in AREAS)

#: Correct identifications per area required of each group. These integer
#: counts are the unique numerators that reproduce the reference study's
#: per-sequence accuracy displays at denominators 20 and 16.
CORRECT_COUNTS = {
    ParticipantGroup.LOCAL: {
        "asakusa": 20, "harajuku": 20, "ueno": 18, "shimokitazawa": 18, "shibuya": 18,
        "ikebukuro": 18, "kagurazaka": 17, "yanesen": 17, "roppongi": 16,
    },
    ParticipantGroup.FOREIGN: {
        "asakusa": 16, "harajuku": 16, "shimokitazawa": 13, "shibuya": 12, "roppongi": 10,
        "ueno": 9, "ikebukuro": 9, "yanesen": 8, "kagurazaka": 7,
    },
}

#: Per-participant correct-answer totals (out of 9), chosen so the
#: per-participant accuracy histogram has its 44% bin holding exactly 3
#: participants and its 100% bin exactly 14, while row sums match the
#: per-area counts above. Verified feasible by the degree-sequence build.
ROW_SUMS = {
    ParticipantGroup.LOCAL: (9,) * 14 + (8,) * 3 + (4,) * 3,
    ParticipantGroup.FOREIGN: (8,) * 6 + (7,) + (5,) * 9,
}

#: Familiarity score totals: sum over the group of 10×weight, i.e.
#: 4·quick + 7·regular + 10·continuous. Each divided by its group size
#: yields the reference familiarity-rate display after rounding.
FAMILIARITY_SCORES = {
    ParticipantGroup.LOCAL: {
        "shibuya": 138, "ueno": 126, "shimokitazawa": 121, "harajuku": 114, "asakusa": 113,
        "ikebukuro": 108, "roppongi": 101, "kagurazaka": 87, "yanesen": 63,
    },
    ParticipantGroup.FOREIGN: {
        "shibuya": 109, "harajuku": 101, "ikebukuro": 99, "ueno": 96, "roppongi": 74,
        "shimokitazawa": 70, "asakusa": 70, "kagurazaka": 30, "yanesen": 8,
    },
}

#: Per-area top-3 element targets: (group, canonical term, mention count,
#: surface form planted in the corpus). Surfaces differ from canonical terms
#: where one canonical term spans two thematic readings.
ELEMENT_TARGETS: Mapping[str, tuple] = {
    "shimokitazawa": (
        (ThematicGroup.TYPOLOGY, "shops", 31, "shops"),
        (ThematicGroup.ELEMENT, "clothing", 25, "clothing"),
        (ThematicGroup.QUALITY, "small", 17, "small"),
    ),
    "harajuku": (
        (ThematicGroup.TYPOLOGY, "shops", 24, "shops"),
        (ThematicGroup.QUALITY, "colorful", 22, "colorful"),
        (ThematicGroup.ELEMENT, "fashion", 12, "fashion"),
    ),
    "yanesen": (
        (ThematicGroup.QUALITY, "old", 16, "old"),
        (ThematicGroup.TYPOLOGY, "private house", 12, "private house"),
        (ThematicGroup.CHARACTERISTIC, "narrow", 10, "narrow"),
    ),
    "kagurazaka": (
        (ThematicGroup.QUALITY, "traditional", 12, "traditional"),
        (ThematicGroup.ELEMENT, "river", 10, "river"),
        (ThematicGroup.CHARACTERISTIC, "narrow", 10, "narrow"),
    ),
    "asakusa": (
        (ThematicGroup.COLOR, "red", 38, "red"),
        (ThematicGroup.QUALITY, "traditional", 23, "traditional"),
        (ThematicGroup.TYPOLOGY, "temples", 10, "temples"),
    ),
    "ueno": (
        (ThematicGroup.ENVIRONMENT, "park", 21, "park"),
        (ThematicGroup.TYPOLOGY, "izakaya", 13, "izakaya"),
        (ThematicGroup.CHARACTERISTIC, "wide", 14, "wide"),
    ),
    "shibuya": (
        (ThematicGroup.ELEMENT, "signage", 32, "signage"),
        (ThematicGroup.CHARACTERISTIC, "high", 25, "high"),
        (ThematicGroup.ENVIRONMENT, "river", 20, "riverside"),
    ),
    "ikebukuro": (
        (ThematicGroup.ELEMENT, "signage", 21, "signage"),
        (ThematicGroup.QUALITY, "cluttered", 10, "cluttered"),
        (ThematicGroup.COLOR, "red", 9, "red"),
    ),
    "roppongi": (
        (ThematicGroup.MATERIAL, "glass", 10, "glass"),
        (ThematicGroup.TYPOLOGY, "glass buildings", 10, "glass buildings"),
        (ThematicGroup.ELEMENT, "bridge", 10, "bridge"),
    ),
}

#: Words used for free-text padding. None of these may collide with any
#: lexicon surface token, or padding would leak into the counts; the builder
#: asserts the disjointness on every run.
FILLER_WORDS = (
    "the", "i", "we", "it", "was", "felt", "like", "walking", "through", "somehow",
    "maybe", "evening", "light", "people", "crowds", "noise", "quiet", "corner",
    "turn", "again", "later", "moment", "screen", "video", "scene", "camera",
    "footage", "looked", "seemed", "remember", "visited", "once", "nothing",
    "else", "really", "just", "kind", "slightly", "overall", "atmosphere",
    "impression", "texture", "rendering", "motion", "pace", "rhythm",
)

_PROFESSIONS = ("architecture student", "architect", "engineer", "academic researcher", "general employment")
_AI_FAMILIARITY = ("occasional", "regular", "rare")


@dataclass(frozen=True)
class FixtureBundle:
    definition: StudyDefinition
    participants: tuple[ParticipantRecord, ...]
    #: participant_id -> area_id -> level
    profiles: Mapping[str, Mapping[str, FamiliarityLevel]]
    responses: tuple[SequenceResponse, ...]
    lexicon: SemanticLexicon


def fixture_definition() -> StudyDefinition:
    stimuli = tuple(
        StimulusManifest(
            sequence_id=f"seq-{a.area_id}",
            area_id=a.area_id,
            media_uri=f"media/{a.area_id}.mp4",
            duration_s=30.0,
            frame_count=385,
            nominal_fps=12.83,
            denoising_strength=0.65,
        )
        for a in AREAS
    )
    return StudyDefinition(
        study_id=STUDY_ID,
        title="Nine-area synthetic sequence recognition study",
        areas=AREAS,
        stimuli=stimuli,
        schedule=PhaseSchedule(),
        instrument=default_instrument(),
    )


def _build_matrix(
    column_counts: Mapping[str, int], row_sums: Sequence[int]
) -> list[set[str]]:
    """Assign correct cells so every area column and participant row hits its
    target sum. Greedy degree-sequence construction: take columns by
    descending demand, give each its cells on the rows with the most capacity
    left (stable order on ties). Raises if the targets cannot be met.
    """
    capacities = list(row_sums)
    rows: list[set[str]] = [set() for _ in row_sums]
    ordered_areas = sorted(
        column_counts, key=lambda aid: (-column_counts[aid], AREA_IDS.index(aid))
    )
    for area_id in ordered_areas:
        need = column_counts[area_id]
        by_capacity = sorted(range(len(capacities)), key=lambda i: (-capacities[i], i))
        chosen = by_capacity[:need]
        if len(chosen) < need or any(capacities[i] <= 0 for i in chosen):
            raise DomainError(
                f"correct-count targets unsatisfiable at area {area_id}",
                reason="unsatisfiable_fixture",
            )
        for i in chosen:
            capacities[i] -= 1
            rows[i].add(area_id)
    if any(capacities):
        raise DomainError(
            "row totals left unmet after assigning all areas", reason="unsatisfiable_fixture"
        )
    return rows


def _decompose_familiarity(total: int, group_size: int, area_id: str) -> tuple[int, int, int]:
    """Split a 10×weight score total into level counts (quick, regular,
    continuous); anyone left over is not familiar."""
    for continuous in range(min(group_size, total // 10), -1, -1):
        rem = total - 10 * continuous
        for regular in range(min(group_size - continuous, rem // 7), -1, -1):
            rem2 = rem - 7 * regular
            if rem2 % 4 == 0:
                quick = rem2 // 4
                if quick + regular + continuous <= group_size:
                    return quick, regular, continuous
    raise DomainError(
        f"familiarity score {total} unreachable for {area_id} with {group_size} respondents",
        reason="unsatisfiable_fixture",
    )


def _assert_filler_disjoint(lexicon: SemanticLexicon) -> None:
    surface_tokens = set()
    for surface in lexicon.entries:
        surface_tokens.update(surface.split())
    collisions = sorted(set(FILLER_WORDS) & surface_tokens)
    if collisions:
        raise DomainError(
            f"filler words collide with lexicon surfaces: {', '.join(collisions)}",
            reason="unsatisfiable_fixture",
        )


def _padded(mentions: Sequence[str], rng: random.Random) -> str:
    """Weave mention surfaces into filler so no two mentions are adjacent and
    phrase surfaces stay contiguous."""
    parts = []
    for m in mentions:
        parts.append(rng.choice(FILLER_WORDS))
        parts.append(m)
    parts.append(rng.choice(FILLER_WORDS))
    return " ".join(parts)


def _filler_sentence(rng: random.Random, lo: int = 3, hi: int = 7) -> str:
    return " ".join(rng.choice(FILLER_WORDS) for _ in range(rng.randint(lo, hi)))


def build_fixture(seed: int = 0) -> FixtureBundle:
    definition = fixture_definition()
    lexicon = load_starter_lexicon()
    _assert_filler_disjoint(lexicon)

    members = {
        ParticipantGroup.LOCAL: [f"P{i:02d}" for i in range(1, 21)],
        ParticipantGroup.FOREIGN: [f"P{i:02d}" for i in range(21, 37)],
    }

    residence = {}
    for i, pid in enumerate(members[ParticipantGroup.LOCAL]):
        residence[pid] = (
            ResidenceBucket.Y1_TO_3 if i < 1 else ResidenceBucket.Y3_TO_5 if i < 6 else ResidenceBucket.OVER_5Y
        )
    for i, pid in enumerate(members[ParticipantGroup.FOREIGN]):
        residence[pid] = ResidenceBucket.UNDER_1Y if i < 3 else ResidenceBucket.Y1_TO_3

    participants = []
    all_ids = members[ParticipantGroup.LOCAL] + members[ParticipantGroup.FOREIGN]
    for i, pid in enumerate(all_ids):
        group = ParticipantGroup.LOCAL if i < 20 else ParticipantGroup.FOREIGN
        participants.append(
            ParticipantRecord(
                participant_id=pid,
                group=group,
                age=21 + (i * 5) % 22,
                residence_bucket=residence[pid],
                profession=_PROFESSIONS[i % len(_PROFESSIONS)],
                ai_familiarity=_AI_FAMILIARITY[i % len(_AI_FAMILIARITY)],
            )
        )

    # familiarity profiles: decompose each score total into level counts and
    # rotate the assignment start per area so profiles vary across people
    profiles: dict[str, dict[str, FamiliarityLevel]] = {pid: {} for pid in all_ids}
    for group, ids in members.items():
        for area_index, area_id in enumerate(AREA_IDS):
            total = FAMILIARITY_SCORES[group][area_id]
            quick, regular, continuous = _decompose_familiarity(total, len(ids), area_id)
            offset = (area_index * 3) % len(ids)
            rotated = ids[offset:] + ids[:offset]
            levels = (
                [FamiliarityLevel.CONTINUOUS_RESIDENCE] * continuous
                + [FamiliarityLevel.REGULAR_ATTENDANCE] * regular
                + [FamiliarityLevel.QUICK_VISITS] * quick
            )
            levels += [FamiliarityLevel.NOT_FAMILIAR] * (len(ids) - len(levels))
            for pid, level in zip(rotated, levels):
                profiles[pid][area_id] = level

    # correct-cell matrix per group
    correct: dict[str, set[str]] = {}
    for group, ids in members.items():
        rows = _build_matrix(CORRECT_COUNTS[group], ROW_SUMS[group])
        for pid, areas in zip(ids, rows):
            correct[pid] = areas

    # deal each area's mention surfaces round-robin over its correct responses
    mention_share: dict[tuple[str, str], list[str]] = {}
    for area_id, targets in ELEMENT_TARGETS.items():
        correct_pids = [pid for pid in all_ids if area_id in correct[pid]]
        expected = CORRECT_COUNTS[ParticipantGroup.LOCAL][area_id] + CORRECT_COUNTS[ParticipantGroup.FOREIGN][area_id]
        if len(correct_pids) != expected:
            raise DomainError(
                f"matrix gives {len(correct_pids)} correct responses for {area_id}, need {expected}",
                reason="unsatisfiable_fixture",
            )
        mentions: list[str] = []
        for _, _, count, surface in targets:
            mentions.extend([surface] * count)
        for idx, m in enumerate(mentions):
            mention_share.setdefault((area_id, correct_pids[idx % len(correct_pids)]), []).append(m)

    responses = []
    truth = definition.truth()
    for pid in all_ids:
        for area_id in AREA_IDS:
            seq = f"seq-{area_id}"
            rng = random.Random(f"{seed}:text:{pid}:{seq}")
            if area_id in correct[pid]:
                guess = area_id
                share = mention_share.get((area_id, pid), [])
                q2_mentions = share[0::2]
                q3_mentions = share[1::2]
                q2 = _padded(q2_mentions, rng) if q2_mentions else _filler_sentence(rng)
                q3 = _padded(q3_mentions, rng) if q3_mentions else _filler_sentence(rng)
            else:
                wrong_rng = random.Random(f"{seed}:guess:{pid}:{seq}")
                guess = wrong_rng.choice([a for a in AREA_IDS if a != area_id])
                q2 = _filler_sentence(rng)
                q3 = _filler_sentence(rng)
            responses.append(
                SequenceResponse(
                    participant_id=pid,
                    sequence_id=seq,
                    guessed_area_id=guess,
                    q2_text=q2,
                    q3_text=q3,
                    q4_text=_filler_sentence(rng),
                    q5_text=_filler_sentence(rng),
                    loops_viewed=5,
                )
            )
    assert all(truth[r.sequence_id] == r.sequence_id.removeprefix("seq-") for r in responses)

    return FixtureBundle(
        definition=definition,
        participants=tuple(participants),
        profiles=profiles,
        responses=tuple(responses),
        lexicon=lexicon,
    )


def populate_store(store: EventStore, bundle: FixtureBundle) -> None:
    """Load a bundle into a store through the normal event pathway."""
    store.create_study(bundle.definition)
    for record in bundle.participants:
        store.register_participant(STUDY_ID, record)
        store.submit_familiarity(STUDY_ID, record.participant_id, bundle.profiles[record.participant_id])
    for response in bundle.responses:
        store.append(
            EventKind.RESPONSE_SUBMITTED,
            {
                "study_id": STUDY_ID,
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


def write_fixture(out_dir: Path, seed: int = 0) -> dict[str, Path]:
    """Emit the bundle as ingestible files plus a readable corpus digest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = build_fixture(seed)

    paths = {
        "study": out_dir / "study.json",
        "participants": out_dir / "participants.jsonl",
        "responses_csv": out_dir / "responses.csv",
        "responses_jsonl": out_dir / "responses.jsonl",
        "lexicon": out_dir / "lexicon.tsv",
        "corpus": out_dir / "corpus.txt",
    }

    paths["study"].write_text(bundle.definition.to_json(), "utf-8")

    lines = []
    for record in bundle.participants:
        lines.append(
            json.dumps(
                {
                    "record": "participant",
                    "participant_id": record.participant_id,
                    "group": record.group.value,
                    "age": record.age,
                    "residence_bucket": record.residence_bucket.value,
                    "profession": record.profession,
                    "ai_familiarity": record.ai_familiarity,
                    "familiarity": {
                        area: level.value for area, level in bundle.profiles[record.participant_id].items()
                    },
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    paths["participants"].write_text("\n".join(lines) + "\n", "utf-8")

    group_of = {p.participant_id: p.group.value for p in bundle.participants}
    csv_lines = ["participant_id,group,sequence_id,guessed_area_id,q2,q3,q4,q5"]
    jsonl_lines = []
    for r in bundle.responses:
        row = {
            "participant_id": r.participant_id,
            "group": group_of[r.participant_id],
            "sequence_id": r.sequence_id,
            "guessed_area_id": r.guessed_area_id,
            "q2": r.q2_text,
            "q3": r.q3_text,
            "q4": r.q4_text,
            "q5": r.q5_text,
        }
        jsonl_lines.append(json.dumps(row, ensure_ascii=False, sort_keys=True))
        # fixture text is comma-free and quote-free, so plain joining is safe;
        # assert rather than silently emit a malformed table
        cells = [r.participant_id, group_of[r.participant_id], r.sequence_id, r.guessed_area_id or ""]
        cells += [r.q2_text, r.q3_text, r.q4_text, r.q5_text]
        if any("," in c or '"' in c or "\n" in c for c in cells):
            raise DomainError("fixture text needs csv quoting unexpectedly", reason="unsatisfiable_fixture")
        csv_lines.append(",".join(cells))
    paths["responses_csv"].write_text("\n".join(csv_lines) + "\n", "utf-8")
    paths["responses_jsonl"].write_text("\n".join(jsonl_lines) + "\n", "utf-8")

    from importlib import resources

    starter = resources.files("urbanid").joinpath("data/starter_lexicon.tsv").read_text("utf-8")
    paths["lexicon"].write_text(starter, "utf-8")

    corpus_lines = []
    truth = bundle.definition.truth()
    for area_id in AREA_IDS:
        corpus_lines.append(f"## {area_id}")
        for r in bundle.responses:
            if truth[r.sequence_id] == area_id and r.guessed_area_id == area_id:
                corpus_lines.append(f"{r.participant_id}: {r.q2_text} / {r.q3_text} / {r.q4_text} / {r.q5_text}")
        corpus_lines.append("")
    paths["corpus"].write_text("\n".join(corpus_lines), "utf-8")

    return paths
