from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional

import pytest

from fsseval.model import (
    AnalysisConfig,
    Authorship,
    Corpus,
    FieldTaxonomy,
    Publication,
    Rank,
    Researcher,
    RoleRecord,
)

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden12"

TAXONOMY = FieldTaxonomy(
    sds_to_uda={"MAT/01": "1", "MAT/02": "1", "MED/01": "6", "ICAR/01": "8"},
    uda_names={"1": "Mathematics", "6": "Medicine", "8": "Civil engineering"},
    alphabetical_order_sds=frozenset({"MAT/01", "MAT/02", "ICAR/01"}),
    position_weighted_udas=frozenset({"6"}),
)


def person(
    rid: str,
    years: Iterable = range(2010, 2015),
    rank: str = "associate",
    sds: str = "MAT/01",
    inst: str = "INST-1",
    flag: Optional[bool] = None,
    given: str = "Marco",
    family: str = "Rossi",
    country: Optional[str] = None,
) -> Researcher:
    """Years may be plain ints or (year, rank, sds) triples."""
    records = []
    for y in years:
        if isinstance(y, tuple):
            records.append(RoleRecord(y[0], Rank(y[1]), y[2]))
        else:
            records.append(RoleRecord(y, Rank(rank), sds))
    return Researcher(rid, given, family, inst, tuple(sorted(records)), flag, country=country)


def corpus_of(
    researchers: list[Researcher],
    pubs: Iterable[tuple] = (),
    bylines: Optional[dict[str, list[tuple]]] = None,
    taxonomy: FieldTaxonomy = TAXONOMY,
    window: tuple[int, int] = (2010, 2014),
) -> Corpus:
    """``pubs`` are (id, year, category, cites); ``bylines`` map id -> [(researcher_id or None, institution)]."""
    publications = tuple(p if isinstance(p, Publication) else Publication(*p) for p in pubs)
    authorships = []
    for pid, byline in (bylines or {}).items():
        for pos, (rid, inst) in enumerate(byline, start=1):
            authorships.append(Authorship(pid, pos, rid, inst))
    return Corpus(tuple(researchers), publications, tuple(authorships), taxonomy, window)


@pytest.fixture
def config() -> AnalysisConfig:
    return AnalysisConfig()


# -- acceptance reporting --------------------------------------------------

_ACCEPTANCE: list[tuple[str, str, float, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name, budget): a top-level acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is not None and report.when == "call":
        name, budget = mark.kwargs["name"], mark.kwargs["budget"]
        _ACCEPTANCE.append((name, "PASS" if report.passed else "FAIL", report.duration, budget))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, duration, budget in _ACCEPTANCE:
        terminalreporter.write_line(f"{verdict}  {name}  ({duration:.2f}s, budget {budget:g}s)")
