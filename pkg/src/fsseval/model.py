"""Domain types shared across the pipeline, plus corpus-level validation."""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional


class Rank(str, Enum):
    ASSISTANT = "assistant"
    ASSOCIATE = "associate"
    FULL = "full"


RANKS = (Rank.ASSISTANT, Rank.ASSOCIATE, Rank.FULL)


class NationalityClass(str, Enum):
    DOMESTIC = "domestic"
    FOREIGN = "foreign"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True, order=True)
class RoleRecord:
    year: int
    rank: Rank
    sds_code: str


def modal_value(pairs: Iterable[tuple[int, str]]) -> str:
    """Most frequent value among (year, value) pairs.

    Ties go to the tied value held in the latest year.
    """
    counts: Counter = Counter()
    latest: dict = {}
    for year, value in pairs:
        counts[value] += 1
        latest[value] = max(latest.get(value, year), year)
    if not counts:
        raise ValueError("no values to choose from")
    return max(counts, key=lambda v: (counts[v], latest[v]))


@dataclass(frozen=True)
class Researcher:
    researcher_id: str
    given_name: str
    family_name: str
    institution_id: str
    role_records: tuple[RoleRecord, ...]
    foreign_birth_flag: Optional[bool] = None
    nationality_class: NationalityClass = NationalityClass.UNRESOLVED
    # ingested for provenance reporting only
    country: Optional[str] = None
    gender: Optional[str] = None

    def years_in(self, start: int, end: int) -> list[RoleRecord]:
        return [r for r in self.role_records if start <= r.year <= end]

    def modal_sds(self, start: int, end: int) -> str:
        return modal_value((r.year, r.sds_code) for r in self.years_in(start, end))

    def modal_rank(self, start: int, end: int) -> Rank:
        return Rank(modal_value((r.year, r.rank.value) for r in self.years_in(start, end)))


@dataclass(frozen=True)
class Publication:
    publication_id: str
    year: int
    subject_category: str
    citation_count: int


@dataclass(frozen=True)
class Authorship:
    publication_id: str
    position: int
    researcher_id: Optional[str] = None
    author_institution_id: Optional[str] = None


@dataclass(frozen=True)
class FieldTaxonomy:
    sds_to_uda: dict[str, str]
    uda_names: dict[str, str]
    alphabetical_order_sds: frozenset[str] = frozenset()
    position_weighted_udas: frozenset[str] = frozenset()

    def uda_of(self, sds_code: str) -> str:
        return self.sds_to_uda[sds_code]

    def udas(self) -> list[str]:
        return sorted(set(self.uda_names) | set(self.sds_to_uda.values()), key=natural_key)


def natural_key(code: str) -> tuple:
    """Sort key putting "2" before "10"."""
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", code))


@dataclass(frozen=True)
class PositionalWeights:
    case_a_end: float = 0.40
    case_a_rest: float = 0.20
    case_b_end: float = 0.30
    case_b_inner: float = 0.15
    case_b_rest: float = 0.10


@dataclass(frozen=True)
class AnalysisConfig:
    window_start: int = 2010
    window_end: int = 2014
    min_role_years: int = 3
    sds_publishing_threshold: float = 0.50
    top1_threshold: float = 99.0
    top5_threshold: float = 95.0
    top10_threshold: float = 90.0
    median_threshold: float = 50.0
    bottom_quintile_threshold: float = 20.0
    weights: PositionalWeights = field(default_factory=PositionalWeights)

    def __post_init__(self) -> None:
        if self.window_end < self.window_start:
            raise ValueError(f"window end {self.window_end} precedes start {self.window_start}")
        if self.window_length < self.min_role_years:
            raise ValueError(
                f"window of {self.window_length} years is shorter than min_role_years={self.min_role_years}"
            )
        if not 0.0 <= self.sds_publishing_threshold <= 1.0:
            raise ValueError("sds_publishing_threshold must lie in [0, 1]")
        w = self.weights
        if abs(2 * w.case_a_end + w.case_a_rest - 1.0) > 1e-12:
            raise ValueError("case A weights must sum to 1")
        if abs(2 * w.case_b_end + 2 * w.case_b_inner + w.case_b_rest - 1.0) > 1e-12:
            raise ValueError("case B weights must sum to 1")

    @property
    def window(self) -> tuple[int, int]:
        return (self.window_start, self.window_end)

    @property
    def window_length(self) -> int:
        return self.window_end - self.window_start + 1


@dataclass(frozen=True)
class Corpus:
    researchers: tuple[Researcher, ...]
    publications: tuple[Publication, ...]
    authorships: tuple[Authorship, ...]
    taxonomy: FieldTaxonomy
    window: tuple[int, int] = (2010, 2014)
    census_date: Optional[date] = None
    dropped_role_records: int = field(default=0, compare=False)

    @cached_property
    def researcher_index(self) -> dict[str, Researcher]:
        return {r.researcher_id: r for r in self.researchers}

    @cached_property
    def publication_index(self) -> dict[str, Publication]:
        return {p.publication_id: p for p in self.publications}

    @cached_property
    def authors_by_publication(self) -> dict[str, list[Authorship]]:
        out: dict[str, list[Authorship]] = defaultdict(list)
        for a in self.authorships:
            out[a.publication_id].append(a)
        for lst in out.values():
            lst.sort(key=lambda a: a.position)
        return dict(out)

    @cached_property
    def publications_by_researcher(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for a in self.authorships:
            if a.researcher_id is not None:
                out[a.researcher_id].append(a.publication_id)
        return {k: sorted(v) for k, v in out.items()}


@dataclass(frozen=True, order=True)
class Violation:
    kind: str  # integrity | uniqueness | range
    record: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.record} [{self.field}] {self.message}"


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Every referential-integrity, uniqueness and range violation in ``corpus``.

    An empty list means the corpus is well formed. The corpus is not touched.
    """
    out: list[Violation] = []
    start, end = corpus.window
    tax = corpus.taxonomy

    for uda in set(tax.sds_to_uda.values()):
        if uda not in tax.uda_names:
            out.append(Violation("integrity", uda, "uda_code", "UDA has no display name"))
    for sds in tax.alphabetical_order_sds:
        if sds not in tax.sds_to_uda:
            out.append(Violation("integrity", sds, "alphabetical_order_sds", "unknown SDS"))

    seen: set[str] = set()
    for r in corpus.researchers:
        rid = r.researcher_id
        if rid in seen:
            out.append(Violation("uniqueness", rid, "researcher_id", "duplicate researcher_id"))
        seen.add(rid)
        years = Counter(rr.year for rr in r.role_records)
        for y, n in sorted(years.items()):
            if n > 1:
                out.append(Violation("uniqueness", rid, "role_records", f"{n} role records for year {y}"))
        for rr in r.role_records:
            if not start <= rr.year <= end:
                out.append(Violation("range", rid, "role_records", f"year {rr.year} outside window {start}-{end}"))
            if rr.sds_code not in tax.sds_to_uda:
                out.append(Violation("integrity", rid, "sds_code", f"unknown SDS {rr.sds_code!r}"))

    seen = set()
    for p in corpus.publications:
        pid = p.publication_id
        if pid in seen:
            out.append(Violation("uniqueness", pid, "publication_id", "duplicate publication_id"))
        seen.add(pid)
        if p.citation_count < 0:
            out.append(Violation("range", pid, "citation_count", f"negative citation count {p.citation_count}"))
        if p.year > end:
            out.append(Violation("range", pid, "year", f"year {p.year} after window end {end}"))

    pubs = {p.publication_id for p in corpus.publications}
    people = {r.researcher_id for r in corpus.researchers}
    positions: dict[str, list[int]] = defaultdict(list)
    members: dict[str, Counter] = defaultdict(Counter)
    for a in corpus.authorships:
        locator = f"{a.publication_id}#{a.position}"
        if a.publication_id not in pubs:
            out.append(Violation("integrity", a.publication_id, "publication_id", f"authorship {locator} references unknown publication"))
        if a.researcher_id is not None:
            if a.researcher_id not in people:
                out.append(Violation("integrity", a.researcher_id, "researcher_id", f"authorship {locator} references unknown researcher"))
            members[a.publication_id][a.researcher_id] += 1
        if a.researcher_id is None and not a.author_institution_id:
            out.append(Violation("integrity", locator, "author_institution_id", "external author without institution"))
        positions[a.publication_id].append(a.position)

    for pid in sorted(positions):
        got = sorted(positions[pid])
        if got != list(range(1, len(got) + 1)):
            out.append(Violation("integrity", pid, "position", f"positions {got} are not contiguous from 1"))
        for rid, n in sorted(members[pid].items()):
            if n > 1:
                out.append(Violation("uniqueness", pid, "researcher_id", f"researcher {rid} listed {n} times"))

    return sorted(out)
