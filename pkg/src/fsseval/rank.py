"""Cohort formation, percentile scoring and tile assignment."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .metrics import Baselines, compute_baselines, compute_fss, staff_years, window_publications
from .model import AnalysisConfig, Corpus, NationalityClass, Rank, Researcher

CohortKey = tuple[Rank, str]

RECORD_COLUMNS = (
    "researcher_id", "rank", "sds_code", "uda_code", "t",
    "publication_count", "fss", "percentile", "tile_flags",
)


@dataclass(frozen=True)
class Tiles:
    top1: bool = False
    top5: bool = False
    top10: bool = False
    above_median: bool = False
    bottom20: bool = False
    unproductive: bool = False

    def flags(self) -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name)]


TILE_NAMES = tuple(f.name for f in fields(Tiles))


@dataclass(frozen=True)
class PerformanceRecord:
    researcher_id: str
    rank: Rank
    sds_code: str
    uda_code: str
    t: int
    publication_count: int
    fss: float
    percentile: Optional[float] = None
    tiles: Tiles = Tiles()
    nationality: NationalityClass = NationalityClass.UNRESOLVED

    @property
    def cohort(self) -> CohortKey:
        return (self.rank, self.sds_code)


class NoEligibleResearchersError(RuntimeError):
    pass


def cohort_key(researcher: Researcher, corpus: Corpus) -> CohortKey:
    start, end = corpus.window
    return (researcher.modal_rank(start, end), researcher.modal_sds(start, end))


def eligible_researchers(corpus: Corpus, config: AnalysisConfig) -> list[Researcher]:
    """Researchers with at least ``min_role_years`` role years in the window."""
    return [r for r in corpus.researchers if staff_years(r, corpus) >= config.min_role_years]


def eligible_sds(corpus: Corpus, config: AnalysisConfig) -> set[str]:
    """SDSs where at least the threshold share of eligible professors published in the window."""
    totals: dict[str, int] = defaultdict(int)
    publishing: dict[str, int] = defaultdict(int)
    start, end = corpus.window
    for r in eligible_researchers(corpus, config):
        sds = r.modal_sds(start, end)
        totals[sds] += 1
        if window_publications(r, corpus):
            publishing[sds] += 1
    return {s for s, n in totals.items() if publishing[s] / n >= config.sds_publishing_threshold}


def form_cohorts(records: Iterable[PerformanceRecord], corpus: Corpus) -> dict[CohortKey, list[PerformanceRecord]]:
    out: dict[CohortKey, list[PerformanceRecord]] = defaultdict(list)
    people = corpus.researcher_index
    for rec in records:
        out[cohort_key(people[rec.researcher_id], corpus)].append(rec)
    return {
        k: sorted(v, key=lambda r: r.researcher_id)
        for k, v in sorted(out.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))
    }


def percentile_fractions(fss: Sequence[float]) -> list[Fraction]:
    """Exact midrank percentiles on a 0 (worst) to 100 (best) scale, in input order.

    A member with ``k`` strictly lower peers sharing its value with ``m`` members
    (itself included) scores ``100 * (k + (m - 1) / 2) / (N - 1)``. A lone
    member scores 50. Over any cohort the exact values average to 50.
    """
    n = len(fss)
    if n == 1:
        return [Fraction(50)]
    order = sorted(range(n), key=lambda i: fss[i])
    out = [Fraction(0)] * n
    k = 0
    while k < n:
        m = 1
        while k + m < n and fss[order[k + m]] == fss[order[k]]:
            m += 1
        p = Fraction(100 * (2 * k + m - 1), 2 * (n - 1))
        for i in order[k:k + m]:
            out[i] = p
        k += m
    return out


def percentile_scores(fss: Sequence[float]) -> list[float]:
    """``percentile_fractions`` rounded once to the nearest float."""
    return [float(p) for p in percentile_fractions(fss)]


def assign_tiles(record: PerformanceRecord, config: AnalysisConfig) -> Tiles:
    p = record.percentile
    if p is None:
        raise ValueError(f"{record.researcher_id} has no percentile")
    return Tiles(
        top1=p >= config.top1_threshold,
        top5=p >= config.top5_threshold,
        top10=p >= config.top10_threshold,
        above_median=p > config.median_threshold,
        bottom20=p < config.bottom_quintile_threshold,
        unproductive=record.fss == 0,
    )


@dataclass(frozen=True)
class Ranking:
    records: tuple[PerformanceRecord, ...]
    eligible_sds: frozenset[str]
    ineligible_researchers: int
    excluded_by_sds: int
    baselines: Baselines

    def by_id(self) -> dict[str, PerformanceRecord]:
        return {r.researcher_id: r for r in self.records}


def score_records(
    corpus: Corpus,
    config: AnalysisConfig,
    baselines: Optional[Baselines] = None,
) -> list[PerformanceRecord]:
    """FSS for every researcher meeting the min-years rule, before SDS filtering and scoring."""
    if baselines is None:
        baselines = compute_baselines(corpus)
    tax = corpus.taxonomy
    out = []
    for r in eligible_researchers(corpus, config):
        rank, sds = cohort_key(r, corpus)
        out.append(PerformanceRecord(
            researcher_id=r.researcher_id,
            rank=rank,
            sds_code=sds,
            uda_code=tax.uda_of(sds),
            t=staff_years(r, corpus),
            publication_count=len(window_publications(r, corpus)),
            fss=compute_fss(r, corpus, baselines, config),
            nationality=r.nationality_class,
        ))
    return out


def rank_corpus(corpus: Corpus, config: AnalysisConfig) -> Ranking:
    """Run FSS, both eligibility filters, cohort percentiles and tiles."""
    baselines = compute_baselines(corpus)
    scored = score_records(corpus, config, baselines)
    keep_sds = eligible_sds(corpus, config)
    kept = [r for r in scored if r.sds_code in keep_sds]
    if not kept:
        raise NoEligibleResearchersError(
            f"no researcher passes the filters: {len(scored)} meet min_role_years="
            f"{config.min_role_years}, none in an SDS with publishing share >= {config.sds_publishing_threshold}"
        )
    ranked = []
    for members in form_cohorts(kept, corpus).values():
        scores = percentile_scores([m.fss for m in members])
        for m, p in zip(members, scores):
            with_p = replace(m, percentile=p)
            ranked.append(replace(with_p, tiles=assign_tiles(with_p, config)))
    ranked.sort(key=lambda r: r.researcher_id)
    return Ranking(
        records=tuple(ranked),
        eligible_sds=frozenset(keep_sds),
        ineligible_researchers=len(corpus.researchers) - len(scored),
        excluded_by_sds=len(scored) - len(kept),
        baselines=baselines,
    )


def with_nationality(records: Iterable[PerformanceRecord], classes: Mapping[str, NationalityClass]) -> list[PerformanceRecord]:
    return [replace(r, nationality=classes.get(r.researcher_id, r.nationality)) for r in records]


def records_csv(records: Iterable[PerformanceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in sorted(records, key=lambda r: r.researcher_id):
        w.writerow([
            r.researcher_id, r.rank.value, r.sds_code, r.uda_code, r.t, r.publication_count,
            repr(r.fss), "" if r.percentile is None else repr(r.percentile), "|".join(r.tiles.flags()),
        ])
    return buf.getvalue()
