"""Citation baselines, fractional author credit and the FSS productivity indicator.

FSS for a researcher with ``t`` years on staff in the window is

    FSS = (1/t) * sum_i (c_i / cbar_i) * f_i

over the researcher's window publications ``i``, where ``c_i`` is the citation
count, ``cbar_i`` the mean citation count of *cited* publications in the same
year and subject category, and ``f_i`` the researcher's share of credit.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .model import AnalysisConfig, Corpus, PositionalWeights, Publication, Researcher

CellKey = tuple[int, str]


class Scheme(str, Enum):
    UNIFORM = "uniform"
    POSITIONAL_CASE_A = "positional_caseA"
    POSITIONAL_CASE_B = "positional_caseB"
    FALLBACK_UNIFORM = "fallback_uniform"


@dataclass(frozen=True)
class FieldBaseline:
    year: int
    subject_category: str
    mean_cited_citations: float
    cited_publication_count: int


@dataclass(frozen=True)
class Baselines:
    cells: dict[CellKey, FieldBaseline]
    empty_cells: tuple[CellKey, ...]

    def __getitem__(self, key: CellKey) -> FieldBaseline:
        return self.cells[key]

    def __contains__(self, key: CellKey) -> bool:
        return key in self.cells

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["year", "subject_category", "mean_cited_citations", "cited_publication_count"])
        for key in sorted(self.cells):
            b = self.cells[key]
            w.writerow([b.year, b.subject_category, repr(b.mean_cited_citations), b.cited_publication_count])
        return buf.getvalue()


@dataclass(frozen=True)
class CreditShare:
    publication_id: str
    position: int
    fraction: float
    scheme: Scheme


class MissingBaselineError(LookupError):
    pass


def compute_baselines(corpus: Corpus) -> Baselines:
    """Mean citations of cited publications per (year, subject category) cell."""
    cited: dict[CellKey, list[int]] = defaultdict(list)
    seen: set[CellKey] = set()
    for p in sorted(corpus.publications, key=lambda p: p.publication_id):
        key = (p.year, p.subject_category)
        seen.add(key)
        if p.citation_count >= 1:
            cited[key].append(p.citation_count)
    cells = {
        key: FieldBaseline(key[0], key[1], sum(v) / len(v), len(v))
        for key, v in sorted(cited.items())
    }
    empty = tuple(sorted(seen - set(cells)))
    return Baselines(cells, empty)


def normalized_impact(publication: Publication, baselines: Baselines) -> float:
    if publication.citation_count == 0:
        return 0.0
    key = (publication.year, publication.subject_category)
    if key not in baselines:
        raise MissingBaselineError(
            f"{publication.publication_id} is cited but cell {key} has no baseline"
        )
    return publication.citation_count / baselines[key].mean_cited_citations


def uniform_fractions(n_authors: int) -> list[float]:
    if n_authors < 1:
        raise ValueError("a publication needs at least one author")
    return [1.0 / n_authors] * n_authors


def _spread(n: int, groups: Sequence[tuple[Sequence[int], float]]) -> list[float]:
    """Split each group's mass evenly over its positions.

    Mass of groups with no positions is redistributed proportionally over the rest.
    """
    live = [(idx, mass) for idx, mass in groups if idx]
    total = sum(mass for _, mass in live) if len(live) < len(groups) else 1.0
    out = [0.0] * n
    for idx, mass in live:
        share = mass / total / len(idx)
        for i in idx:
            out[i] = share
    return out


def positional_fractions(
    institutions: Sequence[Optional[str]],
    weights: PositionalWeights = PositionalWeights(),
) -> tuple[list[float], Scheme]:
    """Credit split by author position for position-ordered fields.

    ``institutions`` lists each author's institution in byline order. When the
    first and last authors share an institution (and there are at least three
    authors), each end gets ``case_a_end`` and the others split
    ``case_a_rest``. Otherwise, with at least four authors, the ends get
    ``case_b_end``, the second and second-to-last ``case_b_inner``, and the
    rest split ``case_b_rest``. Shorter lists fall back to an even split.
    """
    n = len(institutions)
    if n == 0:
        raise ValueError("empty author list")
    same = institutions[0] is not None and institutions[0] == institutions[-1]
    if same and n >= 3:
        inner = range(1, n - 1)
        return _spread(n, [((0, n - 1), 2 * weights.case_a_end), (inner, weights.case_a_rest)]), Scheme.POSITIONAL_CASE_A
    if not same and n >= 4:
        groups = [
            ((0, n - 1), 2 * weights.case_b_end),
            ((1, n - 2), 2 * weights.case_b_inner),
            (range(2, n - 2), weights.case_b_rest),
        ]
        return _spread(n, groups), Scheme.POSITIONAL_CASE_B
    return uniform_fractions(n), Scheme.FALLBACK_UNIFORM


def uses_positional_credit(researcher: Researcher, corpus: Corpus) -> bool:
    start, end = corpus.window
    sds = researcher.modal_sds(start, end)
    return corpus.taxonomy.uda_of(sds) in corpus.taxonomy.position_weighted_udas


def contribution(
    publication: Publication,
    researcher: Researcher,
    corpus: Corpus,
    config: AnalysisConfig,
    positional: Optional[bool] = None,
) -> CreditShare:
    """The researcher's share of credit for ``publication``.

    ``positional`` may be passed to skip the per-call scheme lookup.
    """
    authors = corpus.authors_by_publication.get(publication.publication_id, [])
    mine = [a for a in authors if a.researcher_id == researcher.researcher_id]
    if not mine:
        raise ValueError(f"{researcher.researcher_id} is not an author of {publication.publication_id}")
    position = mine[0].position
    if positional is None:
        positional = uses_positional_credit(researcher, corpus)
    if positional:
        people = corpus.researcher_index
        insts = [
            a.author_institution_id
            or (people[a.researcher_id].institution_id if a.researcher_id in people else None)
            for a in authors
        ]
        fractions, scheme = positional_fractions(insts, config.weights)
    else:
        fractions, scheme = uniform_fractions(len(authors)), Scheme.UNIFORM
    return CreditShare(publication.publication_id, position, fractions[position - 1], scheme)


def window_publications(researcher: Researcher, corpus: Corpus) -> list[Publication]:
    """The researcher's publications dated inside the window, by publication_id."""
    start, end = corpus.window
    pubs = corpus.publication_index
    ids = corpus.publications_by_researcher.get(researcher.researcher_id, [])
    return [pubs[i] for i in ids if start <= pubs[i].year <= end]


def staff_years(researcher: Researcher, corpus: Corpus) -> int:
    start, end = corpus.window
    return len(researcher.years_in(start, end))


def compute_fss(
    researcher: Researcher,
    corpus: Corpus,
    baselines: Baselines,
    config: AnalysisConfig,
) -> float:
    t = staff_years(researcher, corpus)
    if t == 0:
        raise ValueError(f"{researcher.researcher_id} has no role years in the window")
    pubs = window_publications(researcher, corpus)
    if not pubs:
        return 0.0
    positional = uses_positional_credit(researcher, corpus)
    total = 0.0
    for p in pubs:
        impact = normalized_impact(p, baselines)
        if impact:
            total += impact * contribution(p, researcher, corpus, config, positional).fraction
    return total / t
