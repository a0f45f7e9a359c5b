"""Tables and plot-ready CSV computed from run snapshots."""
from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .pipeline import RunState

log = logging.getLogger(__name__)

REPORT_FILES = (
    "top_domains.csv",
    "discovery_curve.csv",
    "phrase_blockrates.csv",
    "rank_annotation.csv",
    "mode_breakdown.csv",
)


class MissingReferenceFile(FileNotFoundError):
    pass


def percent(part: int, whole: int) -> int:
    """``part / whole`` as a whole percentage, halves rounded up."""
    if whole <= 0:
        raise ValueError("whole must be positive")
    return (200 * part + whole) // (2 * whole)


def parent_domains(host: str) -> list[str]:
    """``a.b.c`` -> ``['a.b.c', 'b.c', 'c']``."""
    labels = host.rstrip(".").lower().split(".")
    return [".".join(labels[i:]) for i in range(len(labels))]


# --- per-run tables -------------------------------------------------------------

@dataclass(frozen=True)
class BlockrateRow:
    phrase: str
    gloss: str
    results_returned: int
    unique_hosts: int
    censored_hosts: int
    blockrate: int


def report_blockrates(state: RunState, glossary: Mapping[str, str] | None = None) -> list[BlockrateRow]:
    """One row per used phrase with results; rate = censored hosts / unique result hosts."""
    glossary = glossary or {}
    rows = []
    for phrase, stats in state.phrase_stats.items():
        if stats.unique_hosts == 0:
            continue
        rows.append(BlockrateRow(
            phrase=phrase.surface,
            gloss=glossary.get(phrase.surface, ""),
            results_returned=stats.results_returned,
            unique_hosts=stats.unique_hosts,
            censored_hosts=stats.censored_hosts,
            blockrate=percent(stats.censored_hosts, stats.unique_hosts),
        ))
    rows.sort(key=lambda r: (-r.blockrate, -r.censored_hosts, r.phrase))
    return rows


def report_top_domains(state: RunState, limit: int | None = None) -> list[tuple[str, int]]:
    """Discovered censored hosts ranked by how many unique URLs they contributed."""
    ranked = sorted(((h, state.host_url_counts.get(h, 0)) for h in state.blocklist), key=lambda hc: (-hc[1], hc[0]))
    return ranked[:limit] if limit else ranked


def report_discovery_curve(state: RunState) -> list[tuple[int, int]]:
    """(unique URLs crawled, cumulative censored hosts discovered) points."""
    return [(counter, i) for i, (counter, _host) in enumerate(state.discovery_log, 1)]


# --- rank annotation ----------------------------------------------------------------

def load_ranklist(path: str | Path) -> tuple[dict[str, int], int]:
    """Parse ``rank,domain`` lines; returns (domain -> best rank, malformed line count)."""
    ranks: dict[str, int] = {}
    skipped = 0
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                skipped += 1
                continue
            try:
                rank = int(row[0].strip())
            except ValueError:
                skipped += 1
                continue
            domain = row[1].strip().rstrip(".").lower()
            if rank < 1 or not domain:
                skipped += 1
                continue
            if domain not in ranks or rank < ranks[domain]:
                ranks[domain] = rank
    return ranks, skipped


def annotate_ranks(hosts: Iterable[str], ranklist_file: str | Path) -> tuple[list[tuple[str, int | None]], int]:
    """Rank of each host's longest listed domain suffix (None if unlisted).

    Returns the rows and the number of malformed ranklist lines skipped.
    """
    ranks, skipped = load_ranklist(ranklist_file)
    return annotate_with(hosts, ranks), skipped


def annotate_with(hosts: Iterable[str], ranks: Mapping[str, int]) -> list[tuple[str, int | None]]:
    rows = []
    for host in hosts:
        rank = next((ranks[d] for d in parent_domains(host) if d in ranks), None)
        rows.append((host, rank))
    return rows


# --- cross-mode breakdown ---------------------------------------------------------

def load_reference_list(path: str | Path) -> set[str]:
    """Hosts from a blocklist or ranklist file (last comma field of each line)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MissingReferenceFile(f"cannot read reference list {path}: {exc}") from exc
    hosts = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        field_ = line.split("\t", 1)[0] if "\t" in line else line.rsplit(",", 1)[-1]
        field_ = field_.strip().rstrip(".").lower()
        if field_:
            hosts.add(field_)
    return hosts


def _listed(host: str, reference: set[str]) -> bool:
    return any(d in reference for d in parent_domains(host))


@dataclass
class ModeBreakdown:
    modes: list[str]
    totals: dict[str, int]
    intersections: dict[tuple[str, ...], int]
    union: int
    common: int
    new: dict[str, dict[str, int]] = field(default_factory=dict)  # reference -> mode|"union" -> count

    def rows(self) -> list[tuple[str, str, str, int]]:
        """Long-form ``(measure, modes, reference, count)`` rows."""
        out = [("total", m, "", self.totals[m]) for m in self.modes]
        for combo, n in self.intersections.items():
            out.append(("intersection", "+".join(combo), "", n))
        out.append(("union", "+".join(self.modes), "", self.union))
        out.append(("common", "+".join(self.modes), "", self.common))
        for ref, counts in self.new.items():
            for m in self.modes:
                out.append(("new", m, ref, counts[m]))
            out.append(("new", "union", ref, counts["union"]))
        return out


def mode_breakdown(sets: Mapping[str, set[str]], references: Mapping[str, set[str]] | None = None) -> ModeBreakdown:
    """Set algebra over discovered hosts per n-gram mode.

    "New" counts are hosts not listed (host or any parent domain) in a
    reference list. When several references are given, an extra ``all``
    reference counts hosts missing from every one of them.
    """
    if not sets:
        raise ValueError("need at least one run")
    modes = list(sets)
    totals = {m: len(sets[m]) for m in modes}
    intersections = {}
    for size in range(2, len(modes) + 1):
        for combo in itertools.combinations(modes, size):
            intersections[combo] = len(set.intersection(*(sets[m] for m in combo)))
    union_set = set().union(*sets.values())
    common = len(set.intersection(*(set(sets[m]) for m in modes)))
    refs = dict(references or {})
    if len(refs) > 1:
        refs["all"] = set().union(*refs.values())
    new = {}
    for name, ref in refs.items():
        counts = {m: sum(1 for h in sets[m] if not _listed(h, ref)) for m in modes}
        counts["union"] = sum(1 for h in union_set if not _listed(h, ref))
        new[name] = counts
    return ModeBreakdown(modes, totals, intersections, len(union_set), common, new)


def _mode_keys(states: Sequence[RunState]) -> list[str]:
    keys, seen = [], {}
    for st in states:
        base = st.ngram_mode.value
        seen[base] = seen.get(base, 0) + 1
        keys.append(base if seen[base] == 1 else f"{base}#{seen[base]}")
    return keys


def report_mode_breakdown(states: Sequence[RunState], reference_lists: Mapping[str, str | Path] | None = None) -> ModeBreakdown:
    refs = {name: load_reference_list(path) for name, path in (reference_lists or {}).items()}
    sets = {key: set(st.blocklist) for key, st in zip(_mode_keys(states), states)}
    return mode_breakdown(sets, refs)


# --- CSV output --------------------------------------------------------------------

def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def load_glossary(path: str | Path) -> dict[str, str]:
    """``phrase<TAB>gloss`` lines."""
    glossary = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "\t" in line and not line.startswith("#"):
            phrase, gloss = line.split("\t", 1)
            glossary[" ".join(phrase.split())] = gloss.strip()
    return glossary


def render_reports(
    states: Sequence[RunState],
    ranklist: str | Path | None = None,
    reference_lists: Mapping[str, str | Path] | None = None,
    glossary: Mapping[str, str] | None = None,
) -> dict[str, str]:
    """All five report tables as CSV text, keyed by file name."""
    keys = _mode_keys(states)
    top, curve, rates, ranks = [], [], [], []
    ranklist_ranks: dict[str, int] = {}
    if ranklist:
        ranklist_ranks, skipped = load_ranklist(ranklist)
        if skipped:
            log.warning("%s: skipped %d malformed lines", ranklist, skipped)
    for key, st in zip(keys, states):
        top += [(key, h, n) for h, n in report_top_domains(st)]
        curve += [(key, c, n) for c, n in report_discovery_curve(st)]
        rates += [
            (key, r.phrase, r.gloss, r.results_returned, r.unique_hosts, r.censored_hosts, r.blockrate)
            for r in report_blockrates(st, glossary)
        ]
        for host, rank in annotate_with(sorted(st.blocklist), ranklist_ranks):
            ranks.append((key, host, rank, "listed" if rank is not None else "beyond_list"))
    breakdown = report_mode_breakdown(states, reference_lists)
    return {
        "top_domains.csv": _csv(("ngram_mode", "host", "url_count"), top),
        "discovery_curve.csv": _csv(("ngram_mode", "unique_urls_crawled", "censored_hosts_discovered"), curve),
        "phrase_blockrates.csv": _csv(
            ("ngram_mode", "phrase", "gloss", "results_returned", "unique_hosts", "censored_hosts",
             "blockrate_pct_of_unique_hosts"),
            rates,
        ),
        "rank_annotation.csv": _csv(("ngram_mode", "host", "popularity_rank", "bucket"), ranks),
        "mode_breakdown.csv": _csv(("measure", "modes", "reference", "count"), breakdown.rows()),
    }


def write_reports(out_dir: str | Path, *args, **kwargs) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in render_reports(*args, **kwargs).items():
        path = out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written
