"""Readers and writers for the delimiter-separated input files.

All readers take an open text stream and return plain model objects. Output is
sorted by identifier, so row order in the input never leaks into the result.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Optional, TextIO

from .model import (
    AnalysisConfig,
    Authorship,
    Corpus,
    FieldTaxonomy,
    Publication,
    Rank,
    Researcher,
    RoleRecord,
    Violation,
    validate_corpus,
)

FORMAT_VERSIONS = ("1",)

ROSTER_COLUMNS = (
    "researcher_id", "given_name", "family_name", "institution_id",
    "year", "rank", "sds_code", "foreign_birth_flag",
)
ROSTER_OPTIONAL = ("country", "gender")
PUBLICATION_COLUMNS = ("publication_id", "year", "subject_category", "citation_count")
AUTHORSHIP_COLUMNS = ("publication_id", "position", "researcher_id", "author_institution_id")
TAXONOMY_COLUMNS = ("sds_code", "uda_code", "uda_name", "alphabetical_order_flag", "position_weighted_flag")
OVERRIDE_COLUMNS = ("researcher_id", "resolved_class", "reason")
REGION_COLUMNS = ("country", "region")


class IngestError(ValueError):
    def __init__(self, message: str, source: str = "", line: Optional[int] = None):
        self.source = source
        self.line = line
        where = source
        if line is not None:
            where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class CorpusValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__(f"{len(violations)} validation violation(s):\n" + "\n".join(map(str, violations)))


def read_rows(stream: TextIO, required: Iterable[str], source: str) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield (line number, row) pairs after checking the header."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("missing header row", source, 1) from None
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise IngestError(f"header lacks column(s) {', '.join(missing)}", source, 1)
    for values in reader:
        line = reader.line_num
        if not values or all(not v.strip() for v in values):
            continue
        if len(values) != len(header):
            raise IngestError(f"expected {len(header)} fields, got {len(values)}", source, line)
        yield line, {k: v.strip() for k, v in zip(header, values)}


def _int(value: str, name: str, source: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise IngestError(f"malformed {name} {value!r}", source, line) from None


def _flag(value: str, name: str, source: str, line: int) -> Optional[bool]:
    if value == "":
        return None
    if value in ("0", "1"):
        return value == "1"
    raise IngestError(f"malformed {name} {value!r} (expected 0, 1 or empty)", source, line)


def parse_roster(stream: TextIO, source: str = "roster") -> list[Researcher]:
    """Group researcher-year rows into Researcher objects."""
    people: dict[str, dict] = {}
    records: dict[str, dict[int, RoleRecord]] = defaultdict(dict)
    for line, row in read_rows(stream, ROSTER_COLUMNS, source):
        rid = row["researcher_id"]
        if not rid:
            raise IngestError("empty researcher_id", source, line)
        year = _int(row["year"], "year", source, line)
        try:
            rank = Rank(row["rank"].lower())
        except ValueError:
            raise IngestError(f"unknown rank {row['rank']!r}", source, line) from None
        if not row["sds_code"]:
            raise IngestError("empty sds_code", source, line)
        if year in records[rid]:
            raise IngestError(f"duplicate role record for {rid} in {year}", source, line)
        records[rid][year] = RoleRecord(year, rank, row["sds_code"])

        identity = dict(
            given_name=row["given_name"],
            family_name=row["family_name"],
            institution_id=row["institution_id"],
            foreign_birth_flag=_flag(row["foreign_birth_flag"], "foreign_birth_flag", source, line),
            country=row.get("country") or None,
            gender=row.get("gender") or None,
        )
        if rid in people and people[rid] != identity:
            diff = sorted(k for k in identity if identity[k] != people[rid][k])
            raise IngestError(f"{rid} rows disagree on {', '.join(diff)}", source, line)
        people[rid] = identity

    return [
        Researcher(researcher_id=rid, role_records=tuple(sorted(records[rid].values())), **people[rid])
        for rid in sorted(people)
    ]


def _publication(rec: dict, source: str, line: int) -> Publication:
    pid = str(rec.get("publication_id") or "")
    if not pid:
        raise IngestError("empty publication_id", source, line)
    cat = str(rec.get("subject_category") or "")
    if not cat:
        raise IngestError(f"{pid} has no subject_category", source, line)
    year = _int(str(rec.get("year", "")), "year", source, line)
    cites = _int(str(rec.get("citation_count", "")), "citation_count", source, line)
    if cites < 0:
        raise IngestError(f"{pid} has negative citation_count {cites}", source, line)
    return Publication(pid, year, cat, cites)


def parse_publications(stream: TextIO, source: str = "publications", fmt: str = "csv") -> list[Publication]:
    """Read publication records from CSV (default) or JSON Lines (``fmt="jsonl"``)."""
    if fmt == "csv":
        items = ((line, row) for line, row in read_rows(stream, PUBLICATION_COLUMNS, source))
    elif fmt == "jsonl":
        items = _jsonl(stream, source)
    else:
        raise ValueError(f"unknown publications format {fmt!r}")
    out: dict[str, Publication] = {}
    for line, rec in items:
        pub = _publication(rec, source, line)
        if pub.publication_id in out:
            raise IngestError(f"duplicate publication_id {pub.publication_id}", source, line)
        out[pub.publication_id] = pub
    return [out[k] for k in sorted(out)]


def _jsonl(stream: TextIO, source: str) -> Iterator[tuple[int, dict]]:
    for line, text in enumerate(stream, start=1):
        if not text.strip():
            continue
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise IngestError(f"malformed record: {exc.msg}", source, line) from None
        if not isinstance(rec, dict):
            raise IngestError("record is not an object", source, line)
        yield line, rec


def parse_authorships(stream: TextIO, source: str = "authorships") -> list[Authorship]:
    out: dict[str, dict[int, Authorship]] = defaultdict(dict)
    first_line: dict[str, int] = {}
    for line, row in read_rows(stream, AUTHORSHIP_COLUMNS, source):
        pid = row["publication_id"]
        if not pid:
            raise IngestError("empty publication_id", source, line)
        pos = _int(row["position"], "position", source, line)
        rid = row["researcher_id"] or None
        inst = row["author_institution_id"] or None
        if rid is None and inst is None:
            raise IngestError(f"{pid} position {pos}: neither researcher_id nor author_institution_id", source, line)
        if pos in out[pid]:
            raise IngestError(f"{pid} repeats position {pos}", source, line)
        out[pid][pos] = Authorship(pid, pos, rid, inst)
        first_line.setdefault(pid, line)

    result = []
    for pid in sorted(out):
        positions = sorted(out[pid])
        if positions != list(range(1, len(positions) + 1)):
            raise IngestError(f"{pid} positions {positions} are not contiguous from 1", source, first_line[pid])
        result.extend(out[pid][p] for p in positions)
    return result


def parse_taxonomy(stream: TextIO, source: str = "taxonomy") -> FieldTaxonomy:
    sds_to_uda: dict[str, str] = {}
    names: dict[str, str] = {}
    weighted: dict[str, bool] = {}
    alphabetical = set()
    for line, row in read_rows(stream, TAXONOMY_COLUMNS, source):
        sds, uda = row["sds_code"], row["uda_code"]
        if not sds or not uda:
            raise IngestError("empty sds_code or uda_code", source, line)
        if sds in sds_to_uda:
            raise IngestError(f"duplicate sds_code {sds}", source, line)
        sds_to_uda[sds] = uda
        if uda in names and names[uda] != row["uda_name"]:
            raise IngestError(f"UDA {uda} has conflicting names", source, line)
        names[uda] = row["uda_name"]
        pw = bool(_flag(row["position_weighted_flag"], "position_weighted_flag", source, line))
        if uda in weighted and weighted[uda] != pw:
            raise IngestError(f"UDA {uda} has conflicting position_weighted_flag", source, line)
        weighted[uda] = pw
        if _flag(row["alphabetical_order_flag"], "alphabetical_order_flag", source, line):
            alphabetical.add(sds)
    return FieldTaxonomy(
        sds_to_uda=dict(sorted(sds_to_uda.items())),
        uda_names=dict(sorted(names.items())),
        alphabetical_order_sds=frozenset(alphabetical),
        position_weighted_udas=frozenset(u for u, w in weighted.items() if w),
    )


def parse_region_map(stream: TextIO, source: str = "regions") -> dict[str, str]:
    out = {}
    for line, row in read_rows(stream, REGION_COLUMNS, source):
        if row["country"] in out:
            raise IngestError(f"duplicate country {row['country']}", source, line)
        out[row["country"]] = row["region"]
    return out


@dataclass(frozen=True)
class IngestManifest:
    roster: Path
    publications: Path
    authorships: Path
    taxonomy: Path
    given_names: Optional[Path] = None
    family_names: Optional[Path] = None
    overrides: Optional[Path] = None
    regions: Optional[Path] = None
    census_date: Optional[date] = None
    version: str = "1"

    def __post_init__(self) -> None:
        if self.version not in FORMAT_VERSIONS:
            raise ValueError(f"unrecognized format version {self.version!r}")

    def missing(self) -> list[Path]:
        declared = [self.roster, self.publications, self.authorships, self.taxonomy,
                    self.given_names, self.family_names, self.overrides, self.regions]
        return [p for p in declared if p is not None and not Path(p).is_file()]


def _open(path: Path) -> TextIO:
    return open(path, encoding="utf-8", newline="")


def _drop_outside_window(researchers: list[Researcher], start: int, end: int) -> tuple[list[Researcher], int]:
    dropped = 0
    out = []
    for r in researchers:
        kept = tuple(rr for rr in r.role_records if start <= rr.year <= end)
        dropped += len(r.role_records) - len(kept)
        out.append(replace(r, role_records=kept) if len(kept) != len(r.role_records) else r)
    return out, dropped


def assemble_corpus(
    researchers: list[Researcher],
    publications: list[Publication],
    authorships: list[Authorship],
    taxonomy: FieldTaxonomy,
    config: AnalysisConfig,
    census_date: Optional[date] = None,
) -> Corpus:
    """Apply the window filter, cross-link and validate parsed records."""
    kept, dropped = _drop_outside_window(researchers, config.window_start, config.window_end)
    corpus = Corpus(
        researchers=tuple(kept),
        publications=tuple(publications),
        authorships=tuple(authorships),
        taxonomy=taxonomy,
        window=config.window,
        census_date=census_date,
        dropped_role_records=dropped,
    )
    report = validate_corpus(corpus)
    if report:
        raise CorpusValidationError(report)
    return corpus


def build_corpus(manifest: IngestManifest, config: AnalysisConfig) -> Corpus:
    missing = manifest.missing()
    if missing:
        raise FileNotFoundError(f"missing input file(s): {', '.join(map(str, missing))}")
    with _open(manifest.roster) as fh:
        researchers = parse_roster(fh, str(manifest.roster))
    fmt = "jsonl" if Path(manifest.publications).suffix == ".jsonl" else "csv"
    with _open(manifest.publications) as fh:
        publications = parse_publications(fh, str(manifest.publications), fmt)
    with _open(manifest.authorships) as fh:
        authorships = parse_authorships(fh, str(manifest.authorships))
    with _open(manifest.taxonomy) as fh:
        taxonomy = parse_taxonomy(fh, str(manifest.taxonomy))
    return assemble_corpus(researchers, publications, authorships, taxonomy, config, manifest.census_date)


# -- writers ---------------------------------------------------------------


def _csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _flag_text(flag: Optional[bool]) -> str:
    return "" if flag is None else str(int(flag))


def roster_csv(researchers: Iterable[Researcher]) -> str:
    rows = []
    for r in sorted(researchers, key=lambda r: r.researcher_id):
        for rr in r.role_records:
            rows.append([
                r.researcher_id, r.given_name, r.family_name, r.institution_id,
                rr.year, rr.rank.value, rr.sds_code, _flag_text(r.foreign_birth_flag),
                r.country or "", r.gender or "",
            ])
    return _csv_text(ROSTER_COLUMNS + ROSTER_OPTIONAL, rows)


def publications_csv(publications: Iterable[Publication]) -> str:
    rows = [[p.publication_id, p.year, p.subject_category, p.citation_count]
            for p in sorted(publications, key=lambda p: p.publication_id)]
    return _csv_text(PUBLICATION_COLUMNS, rows)


def authorships_csv(authorships: Iterable[Authorship]) -> str:
    rows = [[a.publication_id, a.position, a.researcher_id or "", a.author_institution_id or ""]
            for a in sorted(authorships, key=lambda a: (a.publication_id, a.position))]
    return _csv_text(AUTHORSHIP_COLUMNS, rows)


def taxonomy_csv(taxonomy: FieldTaxonomy) -> str:
    rows = []
    for sds, uda in sorted(taxonomy.sds_to_uda.items()):
        rows.append([
            sds, uda, taxonomy.uda_names.get(uda, ""),
            int(sds in taxonomy.alphabetical_order_sds),
            int(uda in taxonomy.position_weighted_udas),
        ])
    return _csv_text(TAXONOMY_COLUMNS, rows)


def write_corpus(corpus: Corpus, directory: Path) -> IngestManifest:
    """Serialize ``corpus`` into the input formats; returns a manifest for re-reading it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        "roster": roster_csv(corpus.researchers),
        "publications": publications_csv(corpus.publications),
        "authorships": authorships_csv(corpus.authorships),
        "taxonomy": taxonomy_csv(corpus.taxonomy),
    }
    paths = {}
    for name, text in files.items():
        paths[name] = directory / f"{name}.csv"
        paths[name].write_text(text, encoding="utf-8", newline="")
    return IngestManifest(census_date=corpus.census_date, **paths)
