"""Frequency analysis of free-text answers: term normalization, lexicon
mapping, and per-area element counts restricted to correct identifications."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .model import DomainError, SequenceResponse


class ThematicGroup(str, Enum):
    ELEMENT = "Element"
    ENVIRONMENT = "Environment"
    TYPOLOGY = "Typology"
    COLOR = "Color"
    QUALITY = "Quality"
    CHARACTERISTIC = "Characteristic"
    MATERIAL = "Material"


#: Display order used for deterministic tie-breaks.
GROUP_ORDER = {g: i for i, g in enumerate(ThematicGroup)}

#: Coarse five-group view: quality-like groups collapse into one label.
FIVE_GROUP_VIEW = {
    ThematicGroup.ELEMENT: "Element",
    ThematicGroup.ENVIRONMENT: "Environment",
    ThematicGroup.TYPOLOGY: "Typology",
    ThematicGroup.COLOR: "Color",
    ThematicGroup.QUALITY: "Qualitative Characteristic",
    ThematicGroup.CHARACTERISTIC: "Qualitative Characteristic",
    ThematicGroup.MATERIAL: "Qualitative Characteristic",
}


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    canonical_term: str
    group: ThematicGroup


@dataclass(frozen=True)
class SemanticLexicon:
    """Surface form → (canonical term, group) map with a version tag.

    Surface forms are stored normalized (casefolded, single-spaced). Multi-word
    surfaces match as phrases during term mapping.
    """

    entries: Mapping[str, LexiconEntry]
    version: str = "unversioned"

    def __post_init__(self):
        for surface, entry in self.entries.items():
            if not entry.canonical_term:
                raise DomainError(f"empty canonical term for surface {surface!r}", reason="bad_lexicon")
            if surface != entry.surface:
                raise DomainError(f"entry key {surface!r} != surface {entry.surface!r}", reason="bad_lexicon")

    @classmethod
    def from_entries(cls, entries: Iterable[LexiconEntry], version: str = "unversioned") -> "SemanticLexicon":
        by_surface: dict[str, LexiconEntry] = {}
        for e in entries:
            key = " ".join(e.surface.casefold().split())
            if key in by_surface:
                raise DomainError(f"duplicate lexicon surface: {key!r}", reason="duplicate_surface")
            by_surface[key] = LexiconEntry(surface=key, canonical_term=e.canonical_term, group=e.group)
        return cls(entries=by_surface, version=version)

    @property
    def max_phrase_len(self) -> int:
        return max((len(s.split()) for s in self.entries), default=1)

    def single_token_surfaces(self) -> list[str]:
        return [s for s in self.entries if " " not in s]


def parse_lexicon(text: str) -> SemanticLexicon:
    """Parse the tab-separated lexicon format: surface<TAB>canonical<TAB>group.

    Lines starting with ``#`` are comments; a ``#version=<tag>`` line sets the
    version. Blank lines are ignored.
    """
    version = "unversioned"
    entries: list[LexiconEntry] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("#version="):
                version = line[len("#version="):].strip()
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 3:
            raise DomainError(f"lexicon line {lineno}: expected 3 tab-separated fields", reason="bad_lexicon")
        surface, canonical, group_name = parts
        try:
            group = ThematicGroup(group_name)
        except ValueError:
            raise DomainError(f"lexicon line {lineno}: unknown group {group_name!r}", reason="bad_lexicon") from None
        entries.append(LexiconEntry(surface=surface, canonical_term=canonical, group=group))
    return SemanticLexicon.from_entries(entries, version=version)


def load_starter_lexicon() -> SemanticLexicon:
    """Load the lexicon shipped with the package."""
    text = resources.files("urbanid").joinpath("data/starter_lexicon.tsv").read_text("utf-8")
    return parse_lexicon(text)


def _is_separator(ch: str) -> bool:
    return unicodedata.category(ch).startswith(("P", "S"))


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return (
        0x3040 <= code <= 0x30FF  # hiragana, katakana
        or 0x4E00 <= code <= 0x9FFF  # unified ideographs
        or 0x3400 <= code <= 0x4DBF
        or 0xF900 <= code <= 0xFAFF
    )


def _segment_cjk(run: str, lexicon: Optional[SemanticLexicon]) -> list[str]:
    """Split an unspaced CJK run by longest lexicon-surface match.

    Characters not starting any known surface fall out as single-character
    tokens, which the term mapper then tallies as unmatched.
    """
    surfaces = set(lexicon.entries) if lexicon is not None else set()
    longest = max((len(s) for s in surfaces), default=1)
    tokens = []
    i = 0
    while i < len(run):
        for width in range(min(longest, len(run) - i), 0, -1):
            candidate = run[i : i + width]
            if candidate in surfaces:
                tokens.append(candidate)
                i += width
                break
        else:
            tokens.append(run[i])
            i += 1
    return tokens


def normalize_tokens(text: str, lexicon: Optional[SemanticLexicon] = None) -> list[str]:
    """Casefold, strip punctuation and symbols, and split into tokens.

    Spaced scripts split on whitespace. Unspaced CJK runs are segmented by
    longest match against the lexicon's surface forms so that Japanese
    free-text input participates in the same counting pipeline.
    """
    folded = text.casefold()
    cleaned = "".join(" " if _is_separator(ch) else ch for ch in folded)
    tokens: list[str] = []
    for chunk in cleaned.split():
        run = ""
        latin = ""
        for ch in chunk:
            if _is_cjk(ch):
                if latin:
                    tokens.append(latin)
                    latin = ""
                run += ch
            else:
                if run:
                    tokens.extend(_segment_cjk(run, lexicon))
                    run = ""
                latin += ch
        if latin:
            tokens.append(latin)
        if run:
            tokens.extend(_segment_cjk(run, lexicon))
    return tokens


@dataclass
class MappingTally:
    hits: list[LexiconEntry] = field(default_factory=list)
    unmatched: int = 0


def map_terms(tokens: Sequence[str], lexicon: SemanticLexicon) -> MappingTally:
    """Greedy longest-phrase match over a token stream.

    At each position the longest surface form starting there wins; its tokens
    are consumed. Tokens matching nothing are dropped and counted.
    """
    tally = MappingTally()
    limit = lexicon.max_phrase_len
    i = 0
    while i < len(tokens):
        for width in range(min(limit, len(tokens) - i), 0, -1):
            candidate = " ".join(tokens[i : i + width])
            entry = lexicon.entries.get(candidate)
            if entry is not None:
                tally.hits.append(entry)
                i += width
                break
        else:
            tally.unmatched += 1
            i += 1
    return tally


@dataclass(frozen=True)
class ElementCount:
    group: ThematicGroup
    canonical_term: str
    count: int


@dataclass(frozen=True)
class ElementFrequencyTable:
    """Per-area ordered element counts plus the per-area unmatched tallies."""

    by_area: Mapping[str, tuple[ElementCount, ...]]
    unmatched: Mapping[str, int]
    lexicon_version: str

    def top_k(self, k: int = 3) -> "ElementFrequencyTable":
        if k < 1:
            raise DomainError("k must be ≥ 1", reason="bad_k")
        return ElementFrequencyTable(
            by_area={aid: rows[:k] for aid, rows in self.by_area.items()},
            unmatched=self.unmatched,
            lexicon_version=self.lexicon_version,
        )


DEFAULT_TEXT_FIELDS = ("q2", "q3", "q4", "q5")


def element_frequencies(
    responses: Sequence[SequenceResponse],
    truth: Mapping[str, str],
    lexicon: SemanticLexicon,
    text_fields: Sequence[str] = DEFAULT_TEXT_FIELDS,
) -> ElementFrequencyTable:
    """Count canonical-term mentions per area over correct responses only.

    Every mention counts: one respondent repeating a term three times adds 3.
    Fields are tokenized independently, so tokens never join across answers.
    Areas without a single correct response get an empty row list.
    """
    counts: dict[str, dict[tuple[ThematicGroup, str], int]] = {aid: {} for aid in set(truth.values())}
    unmatched: dict[str, int] = {aid: 0 for aid in counts}
    for r in responses:
        if r.sequence_id not in truth:
            raise DomainError(f"unknown sequence_id: {r.sequence_id}", reason="unknown_sequence")
        area_id = truth[r.sequence_id]
        if r.guessed_area_id != area_id:
            continue
        for text in r.free_text(text_fields):
            tally = map_terms(normalize_tokens(text, lexicon), lexicon)
            unmatched[area_id] += tally.unmatched
            for entry in tally.hits:
                key = (entry.group, entry.canonical_term)
                counts[area_id][key] = counts[area_id].get(key, 0) + 1
    by_area = {}
    for area_id, table in counts.items():
        ordered = sorted(
            table.items(),
            key=lambda kv: (-kv[1], GROUP_ORDER[kv[0][0]], kv[0][1]),
        )
        by_area[area_id] = tuple(
            ElementCount(group=g, canonical_term=t, count=n) for (g, t), n in ordered
        )
    return ElementFrequencyTable(by_area=by_area, unmatched=unmatched, lexicon_version=lexicon.version)
