"""Descriptive report tables over ranked performance records.

Column schemas (row key column first):

* composition:        uda, assistant, associate, full, total
* average_percentile: uda, {assistant,associate,full,total}_obs, {...}_mean
* tile_share:         uda, obs, top1, top5, top10, above_median, bottom20, unproductive
* country_frequency:  country (or region), count
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .model import RANKS, FieldTaxonomy, NationalityClass, Researcher, natural_key
from .rank import TILE_NAMES, PerformanceRecord

NA = "n.a"
TOTAL = "total"


@dataclass(frozen=True)
class Cell:
    role: str  # count | percentage | mean | count_share
    value: Optional[float]
    share: Optional[float] = None

    def text(self) -> str:
        if self.role == "count":
            return str(int(self.value))
        if self.role == "count_share":
            share = NA if self.share is None else f"{self.share:.1f}%"
            return f"{int(self.value)} ({share})"
        if self.value is None:
            return NA
        if self.role == "percentage":
            return f"{self.value:.1f}%"
        return f"{self.value:.1f}"

    def as_dict(self) -> dict:
        d = {"role": self.role, "value": self.value, "text": self.text()}
        if self.role == "count_share":
            d["share"] = self.share
        return d


@dataclass(frozen=True)
class ReportTable:
    name: str
    title: str
    row_label: str
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: Mapping[tuple[str, str], Cell]
    footnotes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if len(set(self.rows)) != len(self.rows) or len(set(self.columns)) != len(self.columns):
            raise ValueError(f"{self.name}: duplicate row or column key")
        expected = {(r, c) for r in self.rows for c in self.columns}
        if set(self.cells) != expected:
            raise ValueError(f"{self.name}: cells do not cover rows x columns exactly")
        for cell in self.cells.values():
            pct = cell.share if cell.role == "count_share" else cell.value if cell.role == "percentage" else None
            if pct is not None and not 0.0 <= pct <= 100.0:
                raise ValueError(f"{self.name}: percentage {pct} out of range")

    def __getitem__(self, key: tuple[str, str]) -> Cell:
        return self.cells[key]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.row_label, *self.columns])
        for r in self.rows:
            w.writerow([r, *(self.cells[r, c].text() for c in self.columns)])
        return buf.getvalue()

    def to_records(self) -> str:
        doc = {
            "name": self.name,
            "title": self.title,
            "row_label": self.row_label,
            "columns": list(self.columns),
            "rows": [
                {"key": r, "cells": {c: self.cells[r, c].as_dict() for c in self.columns}}
                for r in self.rows
            ],
            "footnotes": list(self.footnotes),
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "tabular":
            return self.to_csv()
        if fmt == "records":
            return self.to_records()
        raise ValueError(f"unknown format {fmt!r}")


def _pct(num: int, den: int) -> Optional[float]:
    return num / den * 100.0 if den else None


def _mean(values: Sequence[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def _uda_rows(records: Sequence[PerformanceRecord], taxonomy: Optional[FieldTaxonomy]) -> list[str]:
    udas = set(r.uda_code for r in records)
    if taxonomy is not None:
        udas |= set(taxonomy.udas())
    return sorted(udas, key=natural_key)


def _legend(taxonomy: Optional[FieldTaxonomy], rows: Iterable[str]) -> tuple[str, ...]:
    if taxonomy is None:
        return ()
    names = [f"{u}, {taxonomy.uda_names[u]}" for u in rows if u in taxonomy.uda_names]
    return ("; ".join(names),) if names else ()


def _select(records: Iterable[PerformanceRecord], nationality: Optional[NationalityClass]) -> list[PerformanceRecord]:
    return [r for r in records if nationality is None or r.nationality == nationality]


def composition_report(records: Sequence[PerformanceRecord], taxonomy: Optional[FieldTaxonomy] = None) -> ReportTable:
    """Professor counts by UDA and rank, each with the foreign share in brackets."""
    udas = _uda_rows(records, taxonomy)
    columns = tuple(r.value for r in RANKS) + (TOTAL,)
    counts: Counter = Counter()
    foreign: Counter = Counter()
    for rec in records:
        for row in (rec.uda_code, TOTAL):
            for col in (rec.rank.value, TOTAL):
                counts[row, col] += 1
                if rec.nationality == NationalityClass.FOREIGN:
                    foreign[row, col] += 1
    rows = tuple(udas) + (TOTAL,)
    cells = {
        (r, c): Cell("count_share", counts[r, c], _pct(foreign[r, c], counts[r, c]))
        for r in rows for c in columns
    }
    unresolved = sum(1 for r in records if r.nationality == NationalityClass.UNRESOLVED)
    notes = (f"foreign share in brackets; {unresolved} unresolved researcher(s) counted as non-foreign",)
    return ReportTable("composition", "Professors by UDA and rank (foreign share)", "uda",
                       rows, columns, cells, notes + _legend(taxonomy, udas))


def average_percentile_report(
    records: Sequence[PerformanceRecord],
    nationality: Optional[NationalityClass] = NationalityClass.FOREIGN,
    taxonomy: Optional[FieldTaxonomy] = None,
) -> ReportTable:
    """Observation count and mean FSS percentile by UDA and rank for one group."""
    udas = _uda_rows(records, taxonomy)
    chosen = _select(records, nationality)
    groups: dict[tuple[str, str], list[float]] = defaultdict(list)
    for rec in chosen:
        for row in (rec.uda_code, TOTAL):
            for col in (rec.rank.value, TOTAL):
                groups[row, col].append(rec.percentile)
    rows = tuple(udas) + (TOTAL,)
    keys = [r.value for r in RANKS] + [TOTAL]
    columns = tuple(f"{k}_{s}" for k in keys for s in ("obs", "mean"))
    cells = {}
    for r in rows:
        for k in keys:
            vals = groups.get((r, k), [])
            cells[r, f"{k}_obs"] = Cell("count", len(vals))
            cells[r, f"{k}_mean"] = Cell("mean", _mean(vals))
    who = nationality.value if nationality else "all"
    return ReportTable("average_percentile", f"Average FSS percentile ({who} professors) by UDA and rank",
                       "uda", rows, columns, cells, _legend(taxonomy, udas))


def tile_share_report(
    records: Sequence[PerformanceRecord],
    nationality: Optional[NationalityClass] = NationalityClass.FOREIGN,
    taxonomy: Optional[FieldTaxonomy] = None,
) -> ReportTable:
    """Share of a group falling in each percentile tile, by UDA and overall."""
    udas = _uda_rows(records, taxonomy)
    chosen = _select(records, nationality)
    obs: Counter = Counter()
    hits: Counter = Counter()
    for rec in chosen:
        flags = rec.tiles.flags()
        for row in (rec.uda_code, TOTAL):
            obs[row] += 1
            for f in flags:
                hits[row, f] += 1
    rows = tuple(udas) + (TOTAL,)
    columns = ("obs",) + TILE_NAMES
    cells = {}
    for r in rows:
        cells[r, "obs"] = Cell("count", obs[r])
        for t in TILE_NAMES:
            cells[r, t] = Cell("percentage", _pct(hits[r, t], obs[r]))
    who = nationality.value if nationality else "all"
    return ReportTable("tile_share", f"Share of {who} professors in each FSS tile by UDA",
                       "uda", rows, columns, cells, _legend(taxonomy, udas))


def country_frequency(
    researchers: Iterable[Researcher],
    region_map: Optional[Mapping[str, str]] = None,
    nationality: Optional[NationalityClass] = NationalityClass.FOREIGN,
) -> ReportTable:
    """Counts by provenance country, or by region when ``region_map`` is given.

    Missing provenance (or a country absent from the map) lands in "unknown".
    """
    counts: Counter = Counter()
    for r in researchers:
        if nationality is not None and r.nationality_class != nationality:
            continue
        key = r.country or "unknown"
        if region_map is not None:
            key = region_map.get(key, "unknown")
        counts[key] += 1
    rows = tuple(sorted(counts, key=lambda k: (-counts[k], k)))
    label = "region" if region_map is not None else "country"
    cells = {(k, "count"): Cell("count", counts[k]) for k in rows}
    return ReportTable(f"{label}_frequency", f"Foreign professors by {label} of provenance",
                       label, rows, ("count",), cells)


@dataclass(frozen=True)
class GroupComparison:
    group_a: str
    group_b: str
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float
    delta: float
    rank_deltas: dict[str, Optional[float]]
    tile_deltas: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "group_a": self.group_a, "group_b": self.group_b,
            "n_a": self.n_a, "n_b": self.n_b,
            "mean_percentile_a": self.mean_a, "mean_percentile_b": self.mean_b,
            "delta": self.delta,
            "rank_deltas": self.rank_deltas,
            "tile_share_deltas": self.tile_deltas,
        }


def compare_groups(
    records: Sequence[PerformanceRecord],
    a: NationalityClass = NationalityClass.FOREIGN,
    b: NationalityClass = NationalityClass.DOMESTIC,
) -> GroupComparison:
    """Mean-percentile and tile-share differences, group ``a`` minus group ``b``.

    Purely descriptive. Rank deltas are None where either group has no member.
    """
    ga, gb = _select(records, a), _select(records, b)
    if not ga or not gb:
        raise ValueError(f"cannot compare: {a.value} has {len(ga)} record(s), {b.value} has {len(gb)}")

    def share(group: list[PerformanceRecord], tile: str) -> float:
        return sum(1 for r in group if getattr(r.tiles, tile)) / len(group) * 100.0

    rank_deltas: dict[str, Optional[float]] = {}
    for rank in RANKS:
        ma = _mean([r.percentile for r in ga if r.rank == rank])
        mb = _mean([r.percentile for r in gb if r.rank == rank])
        rank_deltas[rank.value] = None if ma is None or mb is None else ma - mb
    mean_a = _mean([r.percentile for r in ga])
    mean_b = _mean([r.percentile for r in gb])
    return GroupComparison(
        group_a=a.value, group_b=b.value, n_a=len(ga), n_b=len(gb),
        mean_a=mean_a, mean_b=mean_b, delta=mean_a - mean_b,
        rank_deltas=rank_deltas,
        tile_deltas={t: share(ga, t) - share(gb, t) for t in TILE_NAMES},
    )
