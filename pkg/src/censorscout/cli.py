"""Command-line entry points.

Exit status is 0 on success, 2 on usage errors, and 1 on any other failure.
Failures print a JSON object with ``error`` and ``message`` to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import kernels
from .config import RunConfig, apply_overrides, coerce, iter_keys
from .dns.probe import DnsProber, ProbeTarget, load_targets, probe_host, validate_target
from .dns.simcensor import SimulatedCensor
from .ingest import Fetcher, FetchPolicy, extract_text, is_http_url
from .pipeline import Services, checkpoint, load_snapshot, run, write_blocklist
from .ranking import FrequencyTable, RemoteFrequencyClient, score_phrases
from .report import load_glossary, write_reports
from .search import ExclusionList, FixtureSearchBackend, HttpSearchBackend, filter_results, search
from .segment import Phrase, SegmenterDictionary, page_phrases
from .simulation import CONTROL_HOST, World, simulated_services

log = logging.getLogger("censorscout")


class CliError(Exception):
    pass


# --- config plumbing -------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON run configuration")
    group = p.add_argument_group("configuration overrides (one flag per config key)")
    for key, _hint in iter_keys():
        flag = "--" + key.replace(".", "-").replace("_", "-")
        group.add_argument(flag, dest=f"cfg:{key}", metavar="VALUE", default=None)


def _config_from_args(args: argparse.Namespace, base: RunConfig | None = None) -> RunConfig:
    config = base or (RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig())
    hints = dict(iter_keys())
    overrides = {}
    for dest, value in vars(args).items():
        if dest.startswith("cfg:") and value is not None:
            key = dest[4:]
            try:
                overrides[key] = coerce(value, hints[key])
            except ValueError as exc:
                raise CliError(f"--{key}: {exc}") from exc
    return apply_overrides(config, overrides) if overrides else config


def _fetch_policy(config: RunConfig) -> FetchPolicy:
    f = config.fetch
    return FetchPolicy(f.timeout, f.max_body_bytes, f.max_redirects, f.user_agent, f.per_host_delay,
                       f.max_in_flight, f.respect_robots)


def build_backend(config: RunConfig):
    s = config.search
    if s.backend == "fixture":
        if not s.fixture_dir:
            raise CliError("search.backend=fixture needs search.fixture_dir")
        return FixtureSearchBackend(s.fixture_dir)
    if s.backend != "http":
        raise CliError(f"unknown search backend {s.backend!r}")
    extra = {s.market_param: s.market} if s.market else {}
    return HttpSearchBackend(
        s.endpoint, api_key=os.environ.get(s.api_key_env, ""), key_header=s.key_header,
        query_param=s.query_param, count_param=s.count_param, results_path=s.results_path,
        url_field=s.url_field, extra_params=extra, max_qps=s.max_qps, max_in_flight=s.max_in_flight,
    )


def build_corpus(config: RunConfig):
    c = config.corpus
    if c.table:
        return FrequencyTable.load(c.table)
    if c.remote_endpoint:
        if c.remote_corpus_size < 1:
            raise CliError("corpus.remote_corpus_size must be set for a remote corpus")
        return RemoteFrequencyClient(c.remote_endpoint, c.remote_corpus_size, c.cache or None,
                                     c.remote_query_param, c.remote_count_field)
    log.warning("no corpus configured; every phrase gets df=0")
    return FrequencyTable({}, 1)


def build_dictionary(path: str) -> SegmenterDictionary:
    return SegmenterDictionary.load(path) if path else SegmenterDictionary()


def build_prober(config: RunConfig) -> DnsProber:
    p = config.probe
    targets = [ProbeTarget.parse(t) for t in p.targets]
    if p.targets_file:
        targets += load_targets(p.targets_file)
    if not targets:
        raise CliError("no probe targets configured (probe.targets or probe.targets_file)")
    prober = DnsProber(targets, p.trials, p.wait, p.max_in_flight)
    if p.validate_targets:
        if not p.control_host:
            raise CliError("probe.control_host is required to validate targets")
        prober.validate(p.control_host)
    else:
        prober.targets = [ProbeTarget(t.address, t.port, True) for t in targets]
    if not prober.validated_targets:
        raise CliError("no probe target passed validation; every verdict would be Inconclusive")
    return prober


def _emit_outputs(state, config: RunConfig, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_blocklist(state, out_dir / "blocklist.tsv")
    checkpoint(state, out_dir / "snapshot.json", config)
    write_reports(out_dir / "reports", [state])
    return {
        "ngram_mode": state.ngram_mode.value,
        "unique_urls": state.url_counter,
        "pages_processed": state.pages_processed,
        "censored_hosts_discovered": len(state.blocklist),
        "blocklist": str(out_dir / "blocklist.tsv"),
        "snapshot": str(out_dir / "snapshot.json"),
    }


# --- subcommands --------------------------------------------------------------------

def cmd_run(args) -> int:
    state = None
    if args.resume:
        state, saved = load_snapshot(args.resume)
        config = _config_from_args(args, base=saved if saved and not args.config else None)
    else:
        config = _config_from_args(args)
    out_dir = Path(config.output_dir)
    services = Services(
        fetch=Fetcher(_fetch_policy(config)),
        backend=build_backend(config),
        prober=build_prober(config),
        corpus=build_corpus(config),
        dictionary=build_dictionary(config.dictionary),
        fetch_in_flight=config.fetch.max_in_flight,
    )
    state = run(config, services, state=state, snapshot_path=out_dir / "snapshot.json")
    print(json.dumps(_emit_outputs(state, config, out_dir), ensure_ascii=False))
    return 0


def cmd_simulate(args) -> int:
    world = World.load(args.fixture_dir)
    config = _config_from_args(args, base=world.config())
    out_dir = Path(args.out or config.output_dir)
    with simulated_services(world, config) as (services, _censor):
        state = run(config, services)
    print(json.dumps(_emit_outputs(state, config, out_dir), ensure_ascii=False))
    return 0


def cmd_probe(args) -> int:
    def go(targets: list[ProbeTarget], control: str) -> int:
        if args.no_validate:
            targets = [ProbeTarget(t.address, t.port, True) for t in targets]
        else:
            targets = [validate_target(t, control, args.trials, args.wait) for t in targets]
        outcome = probe_host(args.host, targets, args.trials, args.wait)
        print(json.dumps(outcome.to_dict(), ensure_ascii=False))
        return 0

    if args.simulate_censored is not None:
        with SimulatedCensor(args.simulate_censored) as censor:
            return go([censor.target()], args.control_host or CONTROL_HOST)
    targets = [ProbeTarget.parse(t) for t in args.target]
    if args.targets_file:
        targets += load_targets(args.targets_file)
    if not targets:
        raise CliError("give --target, --targets-file or --simulate-censored")
    if not args.control_host and not args.no_validate:
        raise CliError("--control-host is required unless --no-validate is given")
    return go(targets, args.control_host)


def cmd_rank(args) -> int:
    source = args.source
    if is_http_url(source):
        text = Fetcher(FetchPolicy(per_host_delay=0.0, respect_robots=False)).fetch(source).body_text
    else:
        path = Path(source)
        if not path.exists():
            raise CliError(f"no such file: {source}")
        text = extract_text(path.read_bytes())
    corpus = FrequencyTable.load(args.corpus) if args.corpus else FrequencyTable({}, 1)
    counts = page_phrases(text, build_dictionary(args.dictionary), {"unigram": 1, "bigram": 2, "trigram": 3}[args.mode])
    scored = score_phrases(counts, corpus) if counts else []
    print("rank\tphrase\ttf\tdf\tscore")
    for i, sp in enumerate(scored[: args.k], 1):
        print(f"{i}\t{sp.phrase.surface}\t{sp.tf}\t{sp.df}\t{sp.score:.6f}")
    return 0


def cmd_search(args) -> int:
    config = _config_from_args(args)
    if args.fixture_dir:
        config = apply_overrides(config, {"search.backend": "fixture", "search.fixture_dir": args.fixture_dir})
    phrase = Phrase.from_surface(args.phrase)
    results = search(phrase, build_backend(config), args.limit or config.results_per_query, config.search.backoff)
    if not args.no_filter:
        results = filter_results(results, ExclusionList.of(config.exclusions))
    print("rank\thost\turl")
    for r in results:
        print(f"{r.rank}\t{r.host}\t{r.url}")
    return 0


def cmd_report(args) -> int:
    states = [load_snapshot(p)[0] for p in args.snapshot]
    refs = {}
    for item in args.reference or []:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        refs[name] = path
    glossary = load_glossary(args.gloss) if args.gloss else None
    written = write_reports(args.out_dir, states, ranklist=args.ranklist, reference_lists=refs, glossary=glossary)
    print(json.dumps({"reports": [str(p) for p in written]}))
    return 0


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="censorscout", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="live discovery run")
    _add_config_flags(p)
    p.add_argument("--resume", metavar="SNAPSHOT", help="continue from a snapshot")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="offline end-to-end run over a fixture world")
    p.add_argument("fixture_dir")
    p.add_argument("--out", metavar="DIR")
    _add_config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("probe", help="DNS-injection verdict for one host")
    p.add_argument("host")
    p.add_argument("--target", action="append", default=[], metavar="IP[:PORT]")
    p.add_argument("--targets-file")
    p.add_argument("--control-host")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--wait", type=float, default=2.0)
    p.add_argument("--no-validate", action="store_true", help="skip the control-query target check")
    p.add_argument("--simulate-censored", nargs="*", metavar="HOST",
                   help="probe a local simulated injector that censors these hosts")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("rank", help="top TF-IDF phrases of a page (URL or local HTML file)")
    p.add_argument("source")
    p.add_argument("--dictionary", default="")
    p.add_argument("--corpus", default="")
    p.add_argument("--mode", choices=("unigram", "bigram", "trigram"), default="unigram")
    p.add_argument("-k", type=int, default=10)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("search", help="one search call for a phrase")
    p.add_argument("phrase")
    p.add_argument("--fixture-dir")
    p.add_argument("--limit", type=int)
    p.add_argument("--no-filter", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("report", help="CSV reports from one or more snapshots")
    p.add_argument("snapshot", nargs="+")
    p.add_argument("--out-dir", default="reports")
    p.add_argument("--ranklist", help="rank,domain popularity list")
    p.add_argument("--reference", action="append", metavar="NAME=PATH", help="reference list for novelty counts")
    p.add_argument("--gloss", help="phrase<TAB>english gloss file")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        log.debug("command failed", exc_info=True)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}, ensure_ascii=False), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
