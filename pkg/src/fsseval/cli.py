"""Command-line front end.

Exit codes:
    0  success
    2  invalid input: validation violations, malformed files, bad configuration
    3  a referenced file does not exist or cannot be read or written
    4  no researcher survives the eligibility filters
    5  infeasible synthetic-corpus parameters
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

import yaml

from . import __version__
from .analytics import (
    average_percentile_report,
    compare_groups,
    composition_report,
    country_frequency,
    tile_share_report,
)
from .classify import (
    ClassificationResult,
    NameLexicons,
    apply_classes,
    classification_summary,
    classify_researchers,
    parse_overrides,
    read_lexicon,
)
from .ingest import (
    CorpusValidationError,
    IngestError,
    IngestManifest,
    assemble_corpus,
    build_corpus,
    parse_authorships,
    parse_publications,
    parse_region_map,
    parse_roster,
    parse_taxonomy,
)
from .metrics import compute_baselines, compute_fss, staff_years, window_publications
from .model import AnalysisConfig, Corpus, NationalityClass, PositionalWeights
from .rank import (
    RECORD_COLUMNS,
    NoEligibleResearchersError,
    Ranking,
    eligible_researchers,
    rank_corpus,
    records_csv,
)
from .synth import SynthParams, SynthParamsError, generate_corpus, write_synth

log = logging.getLogger("fsseval")

EXIT_OK, EXIT_INVALID, EXIT_MISSING, EXIT_EMPTY, EXIT_SYNTH = 0, 2, 3, 4, 5

PATH_KEYS = ("roster", "publications", "authorships", "taxonomy",
             "given_names", "family_names", "overrides", "regions")
ANALYSIS_KEYS = ("min_years", "threshold", "top1_threshold", "top5_threshold", "top10_threshold",
                 "median_threshold", "bottom_quintile_threshold")
WEIGHT_KEYS = tuple(f.name for f in dataclasses.fields(PositionalWeights))
SYNTH_KEYS = tuple(f.name for f in dataclasses.fields(SynthParams)
                   if f.name not in ("seed", "window_start", "window_end"))
OTHER_KEYS = ("out", "format", "seed", "window", "census_date", "format_version")
KNOWN_KEYS = frozenset(PATH_KEYS + ANALYSIS_KEYS + WEIGHT_KEYS + SYNTH_KEYS + OTHER_KEYS)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    settings: dict[str, Any] = field(default_factory=dict)
    base: Path = Path(".")

    def get(self, key: str, default: Any = None) -> Any:
        return self.settings.get(key, default)

    def path(self, key: str) -> Optional[Path]:
        value = self.settings.get(key)
        if value in (None, ""):
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    @property
    def out(self) -> Path:
        return self.path("out") or Path("out")

    @property
    def fmt(self) -> str:
        return self.settings.get("format", "tabular")

    def window(self) -> tuple[int, int]:
        text = str(self.settings.get("window", "2010:2014"))
        try:
            a, b = text.split(":")
            return int(a), int(b)
        except ValueError:
            raise ConfigError(f"window must look like START:END, got {text!r}") from None

    def analysis(self) -> AnalysisConfig:
        start, end = self.window()
        kw: dict[str, Any] = dict(window_start=start, window_end=end)
        if "min_years" in self.settings:
            kw["min_role_years"] = int(self.settings["min_years"])
        if "threshold" in self.settings:
            kw["sds_publishing_threshold"] = float(self.settings["threshold"])
        for k in ANALYSIS_KEYS[2:]:
            if k in self.settings:
                kw[k] = float(self.settings[k])
        weights = {k: float(self.settings[k]) for k in WEIGHT_KEYS if k in self.settings}
        if weights:
            kw["weights"] = PositionalWeights(**weights)
        try:
            return AnalysisConfig(**kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def census_date(self) -> Optional[date]:
        value = self.settings.get("census_date")
        if value in (None, ""):
            return None
        if isinstance(value, date):
            return value
        try:
            return date.fromisoformat(str(value))
        except ValueError:
            raise ConfigError(f"census_date must be YYYY-MM-DD, got {value!r}") from None

    def manifest(self) -> IngestManifest:
        missing = [k for k in ("roster", "publications", "authorships", "taxonomy") if self.path(k) is None]
        if missing:
            raise ConfigError(f"no path configured for {', '.join(missing)}")
        try:
            return IngestManifest(
                **{k: self.path(k) for k in PATH_KEYS},
                census_date=self.census_date(),
                version=str(self.settings.get("format_version", "1")),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def synth_params(self) -> SynthParams:
        start, end = self.window()
        kw = {k: self.settings[k] for k in SYNTH_KEYS if k in self.settings}
        if "position_weighted_udas" in kw:
            kw["position_weighted_udas"] = tuple(str(u) for u in kw["position_weighted_udas"])
        return SynthParams(seed=int(self.settings.get("seed", 0)), window_start=start, window_end=end, **kw)

    def digest(self) -> str:
        canon = json.dumps(self.settings, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_config(path: Optional[Path], overrides: dict[str, Any]) -> RunConfig:
    settings: dict[str, Any] = {}
    base = Path(".")
    if path is not None:
        if not path.is_file():
            raise FileNotFoundError(f"config file {path} not found")
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(doc, dict) or any(isinstance(v, dict) for v in doc.values()):
            raise ConfigError(f"{path}: config must be a flat key-value mapping")
        settings.update(doc)
        base = path.parent
    unknown = sorted(set(settings) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for k, v in overrides.items():
        if v is not None:
            settings[k] = v
            if k in PATH_KEYS or k == "out":
                # command-line paths are relative to the working directory
                settings[k] = str(Path(v).resolve())
    if settings.get("format", "tabular") not in ("tabular", "records"):
        raise ConfigError("format must be tabular or records")
    return RunConfig(settings, base)


# -- stages -------------------------------------------------------------------


def _load_corpus(cfg: RunConfig) -> Corpus:
    return build_corpus(cfg.manifest(), cfg.analysis())


def _classify(cfg: RunConfig, corpus: Corpus) -> ClassificationResult:
    given, family = cfg.path("given_names"), cfg.path("family_names")
    if given is None or family is None:
        raise ConfigError("classification needs given_names and family_names lexicon files")
    for p in (given, family, cfg.path("overrides")):
        if p is not None and not p.is_file():
            raise FileNotFoundError(f"missing input file: {p}")
    with open(given, encoding="utf-8") as g, open(family, encoding="utf-8") as f:
        lexicons = NameLexicons.from_tokens(read_lexicon(g), read_lexicon(f))
    overrides = {}
    if cfg.path("overrides") is not None:
        with open(cfg.path("overrides"), encoding="utf-8", newline="") as fh:
            overrides = parse_overrides(fh, str(cfg.path("overrides")))
    return classify_researchers(corpus.researchers, lexicons, overrides)


class Writer:
    def __init__(self, out: Path):
        self.out = out
        self.written: list[Path] = []

    def __call__(self, name: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(text, encoding="utf-8", newline="")
        self.written.append(path)
        return path


def _json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, default=str) + "\n"


def _rows_json(header: Sequence[str], csv_text: str) -> str:
    rows = list(csv.reader(io.StringIO(csv_text)))[1:]
    return _json([dict(zip(header, r)) for r in rows])


def _emit_table(write: Writer, fmt: str, name: str, csv_text: str, header: Sequence[str]) -> None:
    if fmt == "tabular":
        write(f"{name}.csv", csv_text)
    else:
        write(f"{name}.json", _rows_json(header, csv_text))


def stage_baselines(cfg: RunConfig, corpus: Corpus, write: Writer) -> None:
    b = compute_baselines(corpus)
    _emit_table(write, cfg.fmt, "baselines", b.to_csv(),
                ["year", "subject_category", "mean_cited_citations", "cited_publication_count"])
    log.info("%d baseline cells, %d empty cells", len(b.cells), len(b.empty_cells))


def stage_fss(cfg: RunConfig, corpus: Corpus, write: Writer) -> None:
    config = cfg.analysis()
    b = compute_baselines(corpus)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["researcher_id", "t", "publication_count", "fss"]
    w.writerow(header)
    for r in eligible_researchers(corpus, config):
        w.writerow([r.researcher_id, staff_years(r, corpus), len(window_publications(r, corpus)),
                    repr(compute_fss(r, corpus, b, config))])
    _emit_table(write, cfg.fmt, "fss", buf.getvalue(), header)


def stage_rank(cfg: RunConfig, corpus: Corpus, write: Writer) -> Ranking:
    ranking = rank_corpus(corpus, cfg.analysis())
    _emit_table(write, cfg.fmt, "performance_records", records_csv(ranking.records), RECORD_COLUMNS)
    return ranking


def stage_classify(cfg: RunConfig, corpus: Corpus, write: Writer) -> ClassificationResult:
    result = _classify(cfg, corpus)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["researcher_id", "nationality_class", "step"]
    w.writerow(header)
    for rid, c in sorted(result.classifications.items()):
        w.writerow([rid, c.nationality.value, c.step.value])
    _emit_table(write, cfg.fmt, "classification", buf.getvalue(), header)
    summary = classification_summary(result.classifications.values()).as_dict()
    summary["pending_review"] = result.pending
    summary["unused_overrides"] = list(result.unused_overrides)
    write("classification_summary.json", _json(summary))
    if result.pending:
        log.warning("%d researcher(s) unresolved, pending manual review", len(result.pending))
    return result


def write_reports(cfg: RunConfig, classified: Corpus, ranking: Ranking, write: Writer) -> None:
    records = list(ranking.records)
    tax = classified.taxonomy
    ext = "csv" if cfg.fmt == "tabular" else "json"
    tables = [
        composition_report(records, tax),
        average_percentile_report(records, NationalityClass.FOREIGN, tax),
        tile_share_report(records, NationalityClass.FOREIGN, tax),
    ]
    # provenance counts cover the ranked population only
    ranked = {r.researcher_id for r in records}
    people = [r for r in classified.researchers if r.researcher_id in ranked]
    tables.append(country_frequency(people))
    regions = cfg.path("regions")
    if regions is not None:
        with open(regions, encoding="utf-8", newline="") as fh:
            tables.append(country_frequency(people, parse_region_map(fh, str(regions))))
    for t in tables:
        write(f"{t.name}.{ext}", t.render(cfg.fmt))
    try:
        comparison = compare_groups(records, NationalityClass.FOREIGN, NationalityClass.DOMESTIC).as_dict()
    except ValueError as exc:
        comparison = {"error": str(exc)}
    write("comparison.json", _json(comparison))


def stage_report(cfg: RunConfig, corpus: Corpus, write: Writer) -> None:
    classified = apply_classes(corpus, _classify(cfg, corpus))
    write_reports(cfg, classified, rank_corpus(classified, cfg.analysis()), write)


def _counts(corpus: Corpus) -> dict[str, int]:
    return {
        "researchers": len(corpus.researchers),
        "role_records": sum(len(r.role_records) for r in corpus.researchers),
        "publications": len(corpus.publications),
        "authorships": len(corpus.authorships),
    }


def run_pipeline(cfg: RunConfig) -> Path:
    """Every stage in order; returns the output directory."""
    corpus = _load_corpus(cfg)
    write = Writer(cfg.out)
    stage_baselines(cfg, corpus, write)
    stage_fss(cfg, corpus, write)
    result = stage_classify(cfg, corpus, write)
    classified = apply_classes(corpus, result)
    ranking = stage_rank(cfg, classified, write)
    write_reports(cfg, classified, ranking, write)
    outputs = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(write.written)}
    manifest = {
        "tool_version": __version__,
        "config_hash": cfg.digest(),
        "config": cfg.settings,
        "window": list(corpus.window),
        "census_date": corpus.census_date.isoformat() if corpus.census_date else None,
        "corpus": _counts(corpus),
        "dropped_role_records": corpus.dropped_role_records,
        "ineligible_researchers": ranking.ineligible_researchers,
        "excluded_by_sds_filter": ranking.excluded_by_sds,
        "eligible_sds": sorted(ranking.eligible_sds),
        "ranked_researchers": len(ranking.records),
        "outputs": outputs,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (cfg.out / "run_manifest.json").write_text(_json(manifest), encoding="utf-8")
    return cfg.out


def cmd_validate(cfg: RunConfig) -> int:
    m = cfg.manifest()
    missing = m.missing()
    if missing:
        raise FileNotFoundError(f"missing input file(s): {', '.join(map(str, missing))}")
    config = cfg.analysis()

    def read(path, parser, **kw):
        with open(path, encoding="utf-8", newline="") as fh:
            return parser(fh, str(path), **kw)

    fmt = "jsonl" if m.publications.suffix == ".jsonl" else "csv"
    corpus = assemble_corpus(
        read(m.roster, parse_roster), read(m.publications, parse_publications, fmt=fmt),
        read(m.authorships, parse_authorships), read(m.taxonomy, parse_taxonomy),
        config, m.census_date,
    )
    print(f"ok: {_counts(corpus)}; {corpus.dropped_role_records} role record(s) outside the window dropped",
          file=sys.stderr)
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    corpus, truth = generate_corpus(cfg.synth_params())
    manifest = write_synth(corpus, truth, cfg.out)
    # a config next to the files makes the corpus runnable as-is
    runnable = {k: getattr(manifest, k).name for k in PATH_KEYS if getattr(manifest, k) is not None}
    runnable["window"] = "{}:{}".format(*corpus.window)
    (cfg.out / "config.yaml").write_text(yaml.safe_dump(runnable, sort_keys=True), encoding="utf-8")
    print(f"wrote {len(corpus.researchers)} researchers, {len(corpus.publications)} publications to {cfg.out}",
          file=sys.stderr)
    return EXIT_OK


def _stage_command(stage):
    def run(cfg: RunConfig) -> int:
        corpus = _load_corpus(cfg)
        stage(cfg, corpus, Writer(cfg.out))
        return EXIT_OK
    return run


COMMANDS = {
    "validate": cmd_validate,
    "baselines": _stage_command(stage_baselines),
    "fss": _stage_command(stage_fss),
    "rank": _stage_command(stage_rank),
    "classify": _stage_command(stage_classify),
    "report": _stage_command(stage_report),
    "synth": cmd_synth,
    "pipeline": lambda cfg: (run_pipeline(cfg), EXIT_OK)[1],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat YAML key-value configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("tabular", "records"), help="output format")
    common.add_argument("--seed", type=int, help="seed for synth")
    common.add_argument("--window", help="analysis window START:END")
    common.add_argument("--min-years", type=int, dest="min_years")
    common.add_argument("--threshold", type=float, help="SDS publishing threshold")
    for key in PATH_KEYS:
        common.add_argument(f"--{key.replace('_', '-')}", dest=key, help=f"{key} input file")
    common.add_argument("--census-date", dest="census_date")
    common.add_argument("--n-researchers", type=int, dest="n_researchers")
    common.add_argument("--foreign-share", type=float, dest="foreign_share")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="fsseval", description="Research-performance analytics (FSS).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    flags = {k: getattr(args, k, None) for k in KNOWN_KEYS}
    try:
        cfg = load_config(args.config, flags)
        return COMMANDS[args.command](cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except CorpusValidationError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except (IngestError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoEligibleResearchersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except SynthParamsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTH
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
