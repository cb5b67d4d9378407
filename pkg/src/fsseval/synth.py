"""Seeded synthetic corpora with known ground truth, and a brute-force oracle.

Randomness comes from NumPy's PCG64 bit generator seeded with ``params.seed``
(``numpy.random.Generator(numpy.random.PCG64(seed))``). Draws happen in a fixed
order, so a seed and parameter set always reproduce the same corpus.

Citation counts: a publication is uncited with probability ``uncited_prob``
(always, in the designated uncited category); otherwise the count is a Zipf
draw with exponent ``citation_exponent``, capped at 5000, scaled by the
author's latent quality and floored at 1. A byline has
``1 + min(max_authors - 1, Poisson(mean_coauthors))`` authors.

The oracle functions below recompute FSS and percentiles by direct
enumeration. They share no code with the metrics and rank modules.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .ingest import IngestManifest, write_corpus
from .model import (
    AnalysisConfig,
    Authorship,
    Corpus,
    FieldTaxonomy,
    Publication,
    RANKS,
    Researcher,
    RoleRecord,
    validate_corpus,
)

# Disjoint name pools; foreign ones carry diacritics to exercise normalization.
_DOMESTIC_GIVEN = [a + b for a in ("Ma", "Lu", "Gio", "Fra", "An", "Ste", "Pa", "Ro")
                   for b in ("rco", "ca", "vanni", "ncesca", "gela", "fano", "ola", "berta")]
_DOMESTIC_FAMILY = [a + b for a in ("Ros", "Bian", "Es", "Ric", "Co", "Fer", "Gal", "Con")
                    for b in ("si", "chi", "posito", "ciardi", "lombo", "rari", "lotti", "ti")]
_FOREIGN_GIVEN = [a + b for a in ("Klä", "Jo", "Wil", "Ing", "Sven", "Hau", "Bjö", "Dmi")
                  for b in ("us", "hn", "helm", "rid", "ke", "tri", "rn", "ek")]
_FOREIGN_FAMILY = [a + b for a in ("Mül", "Schmi", "Wag", "Ber", "Hof", "Kow", "Nak", "Pé")
                   for b in ("ler", "dt", "ner", "ger", "mann", "alski", "amura", "trov")]
_COUNTRIES = ["Germany", "United States", "Greece", "France", "Spain", "Iran",
              "China", "Argentina", "Australia", "Tunisia"]

CITATION_CAP = 5000


class SynthParamsError(ValueError):
    pass


@dataclass(frozen=True)
class SynthParams:
    seed: int = 0
    n_researchers: int = 60
    n_udas: int = 3
    sds_per_uda: int = 2
    n_categories: int = 5
    n_institutions: int = 4
    window_start: int = 2010
    window_end: int = 2014
    foreign_share: float = 0.05
    mixed_name_share: float = 0.25
    abroad_domestic_share: float = 0.03
    unresolved_count: int = 0
    pub_rate: float = 1.2
    uncited_prob: float = 0.3
    uncited_category: bool = True
    citation_exponent: float = 2.0
    max_authors: int = 12
    mean_coauthors: float = 3.0
    coauthor_prob: float = 0.25
    same_institution_prob: float = 0.5
    changer_prob: float = 0.2
    short_tenure_prob: float = 0.15
    pre_window_prob: float = 0.1
    position_weighted_udas: tuple[str, ...] = ("1",)
    foreign_shift: float = 0.0

    def validate(self) -> None:
        for name in ("n_researchers", "n_udas", "sds_per_uda", "n_categories", "n_institutions", "max_authors"):
            if getattr(self, name) < 1:
                raise SynthParamsError(f"{name} must be positive")
        for name in ("foreign_share", "mixed_name_share", "abroad_domestic_share", "uncited_prob",
                     "coauthor_prob", "same_institution_prob", "changer_prob", "short_tenure_prob",
                     "pre_window_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthParamsError(f"{name}={v} is not a share in [0, 1]")
        if self.window_end < self.window_start:
            raise SynthParamsError("window end precedes start")
        if self.pub_rate < 0 or self.mean_coauthors < 0 or self.citation_exponent <= 1.0:
            raise SynthParamsError("pub_rate and mean_coauthors must be >= 0, citation_exponent > 1")
        if not -50.0 <= self.foreign_shift <= 50.0:
            raise SynthParamsError("foreign_shift must lie in [-50, 50] percentile points")
        if self.unresolved_count < 0:
            raise SynthParamsError("unresolved_count must be >= 0")
        planted = self.n_foreign + self.n_abroad_domestic + self.unresolved_count
        if planted > self.n_researchers:
            raise SynthParamsError(f"{planted} planted researchers exceed n_researchers={self.n_researchers}")

    @property
    def n_foreign(self) -> int:
        # nearest integer, halves rounded up
        return max(0, math.floor(self.foreign_share * self.n_researchers + 0.5))

    @property
    def n_abroad_domestic(self) -> int:
        return max(0, math.floor(self.abroad_domestic_share * self.n_researchers + 0.5))


@dataclass
class GroundTruth:
    classes: dict[str, str]
    overrides: dict[str, dict[str, str]]
    given_lexicon: list[str]
    family_lexicon: list[str]
    staff_years: dict[str, int]
    quality: dict[str, float]
    params: dict = field(default_factory=dict)

    def eligible(self, min_role_years: int) -> dict[str, bool]:
        return {k: t >= min_role_years for k, t in self.staff_years.items()}

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def generate_corpus(params: SynthParams) -> tuple[Corpus, GroundTruth]:
    params.validate()
    rng = np.random.Generator(np.random.PCG64(params.seed))
    start, end = params.window_start, params.window_end
    years = list(range(start, end + 1))

    udas = [str(u + 1) for u in range(params.n_udas)]
    sds_to_uda = {f"S{u}-{k + 1:02d}": u for u in udas for k in range(params.sds_per_uda)}
    sds_codes = sorted(sds_to_uda)
    weighted = frozenset(u for u in params.position_weighted_udas if u in udas)
    taxonomy = FieldTaxonomy(
        sds_to_uda=sds_to_uda,
        uda_names={u: f"Area {u}" for u in udas},
        alphabetical_order_sds=frozenset(s for s, u in sds_to_uda.items() if u not in weighted),
        position_weighted_udas=weighted,
    )
    categories = [f"C{i + 1:02d}" for i in range(params.n_categories)]
    uncited_cat = categories[-1] if params.uncited_category and len(categories) > 1 else None
    institutions = [f"INST-{i + 1}" for i in range(params.n_institutions)]

    n = params.n_researchers
    ids = [f"R{i + 1:04d}" for i in range(n)]
    order = [int(i) for i in rng.permutation(n)]
    n_f, n_a, n_u = params.n_foreign, params.n_abroad_domestic, params.unresolved_count
    kind = {}
    for j, idx in enumerate(order):
        kind[ids[idx]] = ("foreign" if j < n_f else "abroad" if j < n_f + n_a
                          else "unresolved" if j < n_f + n_a + n_u else "domestic")

    s = 2.0 * params.foreign_shift / 100.0
    researchers: list[Researcher] = []
    classes: dict[str, str] = {}
    overrides: dict[str, dict[str, str]] = {}
    quality: dict[str, float] = {}
    for rid in ids:
        k = kind[rid]
        u = float(rng.random())
        if k == "foreign":
            q = s + (1.0 - s) * u if s >= 0 else (1.0 + s) * u
        else:
            q = u
        quality[rid] = q

        tenure = len(years)
        if rng.random() < params.short_tenure_prob:
            tenure = int(rng.integers(1, len(years))) if len(years) > 1 else 1
        first = start + int(rng.integers(0, len(years) - tenure + 1))
        span = list(range(first, first + tenure))
        rank_i = int(rng.integers(len(RANKS)))
        sds = _pick(rng, sds_codes)
        records = []
        change_at = span[int(rng.integers(len(span)))] if rng.random() < params.changer_prob else None
        new_sds = _pick(rng, sds_codes) if change_at is not None and rng.random() < 0.5 else sds
        for y in span:
            late = change_at is not None and y >= change_at
            rank = RANKS[min(rank_i + 1, 2)] if late else RANKS[rank_i]
            records.append(RoleRecord(y, rank, new_sds if late else sds))

        dg, df = _pick(rng, _DOMESTIC_GIVEN), _pick(rng, _DOMESTIC_FAMILY)
        fg, ff = _pick(rng, _FOREIGN_GIVEN), _pick(rng, _FOREIGN_FAMILY)
        mixed = rng.random() < params.mixed_name_share
        flip = rng.random() < 0.5
        mixed_names = (dg, ff) if flip else (fg, df)
        country = None
        if k == "foreign":
            flag, (given, family) = True, (mixed_names if mixed else (fg, ff))
            country = _pick(rng, _COUNTRIES)
            if mixed:
                overrides[rid] = {"resolved_class": "foreign", "reason": "educational path abroad"}
            classes[rid] = "foreign"
        elif k == "abroad":
            flag, (given, family) = True, (mixed_names if mixed else (dg, df))
            if mixed:
                overrides[rid] = {"resolved_class": "domestic", "reason": "educated domestically"}
            classes[rid] = "domestic"
        elif k == "unresolved":
            flag, (given, family) = True, mixed_names
            classes[rid] = "unresolved"
        else:
            # a foreign-sounding name without the birth flag is still domestic
            flag = False if rng.random() < 0.8 else None
            given, family = (fg, ff) if rng.random() < 0.05 else (dg, df)
            classes[rid] = "domestic"
        researchers.append(Researcher(
            researcher_id=rid, given_name=given, family_name=family,
            institution_id=_pick(rng, institutions), role_records=tuple(records),
            foreign_birth_flag=flag, country=country,
        ))

    people = {r.researcher_id: r for r in researchers}
    publications: list[Publication] = []
    authorships: list[Authorship] = []
    for r in researchers:
        q = quality[r.researcher_id]
        for rec in r.role_records:
            for _ in range(int(rng.poisson(params.pub_rate * (0.2 + 1.6 * q)))):
                pid = f"P{len(publications) + 1:06d}"
                year = rec.year
                if rng.random() < params.pre_window_prob:
                    year = start - 1 - int(rng.integers(0, 2))
                cat = _pick(rng, categories)
                if cat == uncited_cat or rng.random() < params.uncited_prob:
                    cites = 0
                else:
                    z = min(int(rng.zipf(params.citation_exponent)), CITATION_CAP)
                    cites = max(1, int(round(z * (0.5 + 1.5 * q))))
                publications.append(Publication(pid, year, cat, cites))

                n_auth = 1 + min(params.max_authors - 1, int(rng.poisson(params.mean_coauthors)))
                me = int(rng.integers(n_auth))
                taken = {r.researcher_id}
                for pos in range(n_auth):
                    if pos == me:
                        authorships.append(Authorship(pid, pos + 1, r.researcher_id, r.institution_id))
                        continue
                    if rng.random() < params.coauthor_prob:
                        other = _pick(rng, ids)
                        if other not in taken:
                            taken.add(other)
                            authorships.append(Authorship(pid, pos + 1, other, people[other].institution_id))
                            continue
                    inst = r.institution_id if rng.random() < params.same_institution_prob else _pick(rng, institutions + ["EXT-1", "EXT-2"])
                    authorships.append(Authorship(pid, pos + 1, None, inst))

    corpus = Corpus(
        researchers=tuple(researchers),
        publications=tuple(publications),
        authorships=tuple(sorted(authorships, key=lambda a: (a.publication_id, a.position))),
        taxonomy=taxonomy,
        window=(start, end),
    )
    report = validate_corpus(corpus)
    if report:
        raise AssertionError(f"generator produced an invalid corpus: {report[:3]}")
    truth = GroundTruth(
        classes=classes,
        overrides=overrides,
        given_lexicon=sorted(_DOMESTIC_GIVEN),
        family_lexicon=sorted(_DOMESTIC_FAMILY),
        staff_years={r.researcher_id: len(r.role_records) for r in researchers},
        quality=quality,
        params=asdict(params),
    )
    return corpus, truth


def write_synth(corpus: Corpus, truth: GroundTruth, directory: Path) -> IngestManifest:
    """Write a generated corpus in the ingest formats plus lexicons, overrides and ground truth."""
    directory = Path(directory)
    manifest = write_corpus(corpus, directory)
    (directory / "given_names.txt").write_text("\n".join(truth.given_lexicon) + "\n", encoding="utf-8")
    (directory / "family_names.txt").write_text("\n".join(truth.family_lexicon) + "\n", encoding="utf-8")
    lines = ["researcher_id,resolved_class,reason"]
    lines += [f"{rid},{o['resolved_class']},{o['reason']}" for rid, o in sorted(truth.overrides.items())]
    (directory / "overrides.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (directory / "ground_truth.json").write_text(truth.to_json(), encoding="utf-8")
    return IngestManifest(
        roster=manifest.roster, publications=manifest.publications,
        authorships=manifest.authorships, taxonomy=manifest.taxonomy,
        given_names=directory / "given_names.txt", family_names=directory / "family_names.txt",
        overrides=directory / "overrides.csv",
    )


# -- oracle ---------------------------------------------------------------


def _oracle_mode(pairs: list[tuple[int, str]]) -> str:
    counts: dict[str, int] = {}
    for _, v in pairs:
        counts[v] = counts.get(v, 0) + 1
    best = None
    for _, v in sorted(pairs, reverse=True):  # latest year first
        if best is None or counts[v] > counts[best]:
            best = v
    return best


def _oracle_fraction(n: int, pos: int, first_inst, last_inst, positional: bool, config: AnalysisConfig) -> float:
    if not positional:
        return 1.0 / n
    w = config.weights
    same = first_inst is not None and first_inst == last_inst
    if same and n >= 3:
        return w.case_a_end if pos in (1, n) else w.case_a_rest / (n - 2)
    if not same and n >= 4:
        if n == 4:
            norm = 2 * w.case_b_end + 2 * w.case_b_inner
            return (w.case_b_end if pos in (1, 4) else w.case_b_inner) / norm
        if pos in (1, n):
            return w.case_b_end
        if pos in (2, n - 1):
            return w.case_b_inner
        return w.case_b_rest / (n - 4)
    return 1.0 / n


def oracle_fss(corpus: Corpus, config: AnalysisConfig) -> dict[str, float]:
    """FSS for every researcher with enough role years, by direct enumeration."""
    start, end = corpus.window
    roster_inst = {r.researcher_id: r.institution_id for r in corpus.researchers}
    byline: dict[str, list[Authorship]] = {}
    for a in corpus.authorships:
        byline.setdefault(a.publication_id, []).append(a)

    cell_sum: dict[tuple, int] = {}
    cell_n: dict[tuple, int] = {}
    for p in corpus.publications:
        if p.citation_count > 0:
            key = (p.year, p.subject_category)
            cell_sum[key] = cell_sum.get(key, 0) + p.citation_count
            cell_n[key] = cell_n.get(key, 0) + 1

    out: dict[str, float] = {}
    for r in corpus.researchers:
        in_window = [(rr.year, rr.sds_code) for rr in r.role_records if start <= rr.year <= end]
        t = len(in_window)
        if t < config.min_role_years or t == 0:
            continue
        uda = corpus.taxonomy.sds_to_uda[_oracle_mode(in_window)]
        positional = uda in corpus.taxonomy.position_weighted_udas
        terms = []
        for p in corpus.publications:
            if not start <= p.year <= end or p.citation_count == 0:
                continue
            authors = byline.get(p.publication_id, [])
            mine = [a.position for a in authors if a.researcher_id == r.researcher_id]
            if not mine:
                continue
            n = len(authors)
            inst = {a.position: a.author_institution_id or roster_inst.get(a.researcher_id) for a in authors}
            key = (p.year, p.subject_category)
            cbar = cell_sum[key] / cell_n[key]
            f = _oracle_fraction(n, mine[0], inst[1], inst[n], positional, config)
            terms.append((p.publication_id, p.citation_count / cbar * f))
        out[r.researcher_id] = sum(v for _, v in sorted(terms)) / t
    return out


def oracle_percentiles(fss: Mapping[str, float], cohorts: Mapping[object, Iterable[str]]) -> dict[str, float]:
    """Midrank percentiles by counting, for each member, the peers below and level with it."""
    out: dict[str, float] = {}
    for members in cohorts.values():
        members = list(members)
        n = len(members)
        for i in members:
            if n == 1:
                out[i] = 50.0
                continue
            below = sum(1 for j in members if fss[j] < fss[i])
            level = sum(1 for j in members if fss[j] == fss[i])
            out[i] = 100.0 * (2 * below + level - 1) / (2 * (n - 1))
    return out


def oracle_cohorts(corpus: Corpus, ids: Iterable[str]) -> dict[tuple[str, str], list[str]]:
    start, end = corpus.window
    wanted = set(ids)
    out: dict[tuple[str, str], list[str]] = {}
    for r in corpus.researchers:
        if r.researcher_id not in wanted:
            continue
        yrs = [rr for rr in r.role_records if start <= rr.year <= end]
        key = (_oracle_mode([(rr.year, rr.rank.value) for rr in yrs]),
               _oracle_mode([(rr.year, rr.sds_code) for rr in yrs]))
        out.setdefault(key, []).append(r.researcher_id)
    return out
