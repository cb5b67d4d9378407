"""Foreign/domestic classification from birth flag, name lexicons and manual overrides.

1. No foreign-birth flag (absent or false): domestic.
2. Flag set: both names outside the domestic lexicons means foreign, both
   inside means domestic.
3. Mixed names: an override entry decides. Without one the researcher stays
   unresolved and is listed for manual review.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, TextIO

from .ingest import OVERRIDE_COLUMNS, IngestError, read_rows
from .model import Corpus, NationalityClass, Researcher


class Step(str, Enum):
    BIRTH_FLAG = "birth_flag"
    NAMES = "names"
    OVERRIDE = "override"
    PENDING = "pending"


_SPLIT = re.compile(r"[\s\-']+")


def normalize_name(text: str) -> str:
    """Compatibility-decompose, strip combining marks, case-fold, squeeze spaces."""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return " ".join(stripped.casefold().split())


@dataclass(frozen=True)
class NameLexicons:
    given_names: frozenset[str]
    family_names: frozenset[str]

    def __post_init__(self) -> None:
        if not self.given_names or not self.family_names:
            raise ValueError("name lexicons must be nonempty")

    @classmethod
    def from_tokens(cls, given: Iterable[str], family: Iterable[str]) -> "NameLexicons":
        return cls(
            frozenset(normalize_name(t) for t in given if t.strip()),
            frozenset(normalize_name(t) for t in family if t.strip()),
        )

    @staticmethod
    def _known(name: str, lexicon: frozenset[str]) -> bool:
        # whole form first ("de luca"), then every token on its own
        norm = normalize_name(name)
        if norm in lexicon:
            return True
        tokens = [t for t in _SPLIT.split(norm) if t]
        return bool(tokens) and all(t in lexicon for t in tokens)

    def domestic_given(self, name: str) -> bool:
        return self._known(name, self.given_names)

    def domestic_family(self, name: str) -> bool:
        return self._known(name, self.family_names)


def read_lexicon(stream: TextIO) -> list[str]:
    """One token per line; blank lines and ``#`` comments are skipped."""
    return [ln.strip() for ln in stream if ln.strip() and not ln.lstrip().startswith("#")]


@dataclass(frozen=True)
class OverrideEntry:
    researcher_id: str
    resolved_class: NationalityClass
    reason: str = ""


def parse_overrides(stream: TextIO, source: str = "overrides") -> dict[str, OverrideEntry]:
    out: dict[str, OverrideEntry] = {}
    for line, row in read_rows(stream, OVERRIDE_COLUMNS, source):
        rid = row["researcher_id"]
        if rid in out:
            raise IngestError(f"second override for {rid}", source, line)
        try:
            cls = NationalityClass(row["resolved_class"].lower())
        except ValueError:
            cls = None
        if cls not in (NationalityClass.DOMESTIC, NationalityClass.FOREIGN):
            raise IngestError(f"resolved_class must be domestic or foreign, got {row['resolved_class']!r}", source, line)
        out[rid] = OverrideEntry(rid, cls, row["reason"])
    return out


@dataclass(frozen=True)
class Classification:
    researcher_id: str
    nationality: NationalityClass
    step: Step


def classify_nationality(
    researcher: Researcher,
    lexicons: NameLexicons,
    overrides: Mapping[str, OverrideEntry],
) -> Classification:
    rid = researcher.researcher_id
    if not researcher.given_name.strip() or not researcher.family_name.strip():
        raise ValueError(f"{rid} has an empty name field")
    if not researcher.foreign_birth_flag:
        return Classification(rid, NationalityClass.DOMESTIC, Step.BIRTH_FLAG)
    given = lexicons.domestic_given(researcher.given_name)
    family = lexicons.domestic_family(researcher.family_name)
    if given and family:
        return Classification(rid, NationalityClass.DOMESTIC, Step.NAMES)
    if not given and not family:
        return Classification(rid, NationalityClass.FOREIGN, Step.NAMES)
    entry = overrides.get(rid)
    if entry is None:
        return Classification(rid, NationalityClass.UNRESOLVED, Step.PENDING)
    return Classification(rid, entry.resolved_class, Step.OVERRIDE)


@dataclass(frozen=True)
class ClassificationResult:
    classifications: dict[str, Classification]
    unused_overrides: tuple[str, ...]

    @property
    def classes(self) -> dict[str, NationalityClass]:
        return {k: c.nationality for k, c in self.classifications.items()}

    @property
    def pending(self) -> list[str]:
        return sorted(k for k, c in self.classifications.items() if c.step is Step.PENDING)


def classify_researchers(
    researchers: Iterable[Researcher],
    lexicons: NameLexicons,
    overrides: Optional[Mapping[str, OverrideEntry]] = None,
) -> ClassificationResult:
    overrides = overrides or {}
    result = {}
    for r in sorted(researchers, key=lambda r: r.researcher_id):
        result[r.researcher_id] = classify_nationality(r, lexicons, overrides)
    consulted = {k for k, c in result.items() if c.step is Step.OVERRIDE}
    unused = tuple(sorted(set(overrides) - consulted))
    return ClassificationResult(result, unused)


def apply_classes(corpus: Corpus, result: ClassificationResult) -> Corpus:
    people = tuple(
        replace(r, nationality_class=result.classifications[r.researcher_id].nationality)
        if r.researcher_id in result.classifications else r
        for r in corpus.researchers
    )
    return replace(corpus, researchers=people)


@dataclass(frozen=True)
class ClassificationSummary:
    total: int
    by_class: dict[str, int]
    by_step: dict[str, int]
    foreign_share: float
    unresolved: int

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "by_class": self.by_class,
            "by_step": self.by_step,
            "foreign_share": self.foreign_share,
            "unresolved": self.unresolved,
        }


def classification_summary(classifications: Iterable[Classification]) -> ClassificationSummary:
    """Counts per class and deciding step; foreign share is over all researchers."""
    items = list(classifications)
    by_class = Counter(c.nationality.value for c in items)
    by_step = Counter(c.step.value for c in items)
    total = len(items)
    return ClassificationSummary(
        total=total,
        by_class={k.value: by_class.get(k.value, 0) for k in NationalityClass},
        by_step={s.value: by_step.get(s.value, 0) for s in Step},
        foreign_share=by_class.get("foreign", 0) / total if total else 0.0,
        unresolved=by_class.get("unresolved", 0),
    )
