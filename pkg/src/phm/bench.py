"""Benchmark harness: PHM vs. exact string matching over a header trace."""
from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import baseline, matcher
from .header_codec import Header5Tuple, Rule, RuleParseError, load_rules, write_rules
from .trace_io import (BINARY, CSV, TraceFile, TraceFormatError, TraceGenSpec, generate_rules,
                       generate_trace, read_trace, write_trace)

ENGINES = ("phm", "baseline", "both")
CACHE_MODES = ("shared", "fresh")
CSV_COLUMNS = ("engine", "packets", "rules", "repetition", "elapsed_seconds", "matches",
               "energy_evals", "cache_hits")

# packet counts of the published comparison table
TABLE2_PACKETS = (450, 500, 550, 600, 650, 700, 900, 1200, 2500, 3000, 4500, 5500, 8000, 10000)
# published (PHM, SNORT) times per packet count, unlabeled units
PUBLISHED_TIMES = {450: (0.28, 0.60), 500: (0.28, 0.67), 550: (0.37, 0.73), 600: (0.38, 0.85),
                   650: (0.42, 0.84), 700: (0.58, 0.91), 900: (0.82, 1.23), 1200: (1.14, 1.64),
                   2500: (2.33, 3.22), 3000: (3.40, 3.80), 4500: (4.71, 5.93),
                   5500: (5.83, 7.20), 8000: (7.82, 10.47), 10000: (10.78, 13.08)}
# rules in a ~50 KB header rule set at ~105 bits per rule
DEFAULT_RULE_COUNT = 3800


class DifferentialError(RuntimeError):
    """The two engines disagreed on a header."""

    def __init__(self, index: int, header: Header5Tuple, phm_id, baseline_id):
        self.index = index
        self.header = header
        super().__init__(f"engines disagree on header #{index} ({header.to_csv()}): "
                         f"phm={_fmt_id(phm_id)} baseline={_fmt_id(baseline_id)}")


def _fmt_id(rid) -> str:
    return "no-match" if rid == matcher.NO_MATCH else str(rid)


@dataclass
class GenParams:
    count: int
    seed: int = 0
    match: float = 0.1

    @classmethod
    def parse(cls, text: str) -> "GenParams":
        """Parse ``count=N,seed=S,match=F`` (seed and match optional)."""
        values = {}
        for item in text.split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in ("count", "seed", "match"):
                raise ValueError(f"bad --gen item {item!r}")
            values[key] = value.strip()
        if "count" not in values:
            raise ValueError("--gen needs count=N")
        return cls(int(values["count"]), int(values.get("seed", 0)),
                   float(values.get("match", 0.1)))


@dataclass
class BenchConfig:
    rules_path: Optional[Path] = None
    trace_path: Optional[Path] = None
    gen: Optional[GenParams] = None
    engine: str = "both"
    repeat: int = 1
    baseline_alg: str = baseline.BOYER_MOORE
    out: Optional[Path] = None
    cache: str = "shared"
    workers: int = 1
    # in-memory inputs, used instead of the paths when given
    rules: Optional[List[Rule]] = None
    trace: Optional[TraceFile] = None

    def __post_init__(self):
        if self.repeat < 1:
            raise ValueError(f"repeat must be >= 1, got {self.repeat}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.cache not in CACHE_MODES:
            raise ValueError(f"cache must be one of {CACHE_MODES}, got {self.cache!r}")
        if self.baseline_alg not in baseline.ALGORITHMS:
            raise ValueError(f"unknown baseline algorithm {self.baseline_alg!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass
class EngineReport:
    engine: str
    packets: int
    rules: int
    compile_seconds: float = 0.0
    elapsed: List[float] = field(default_factory=list)
    matches: List[int] = field(default_factory=list)
    energy_evals: List[Optional[int]] = field(default_factory=list)
    cache_hits: List[Optional[int]] = field(default_factory=list)
    cache_entries: Optional[int] = None


@dataclass
class BenchReport:
    engines: Dict[str, EngineReport]
    algorithm: str = baseline.BOYER_MOORE

    def speedup(self) -> Optional[float]:
        """Mean baseline time over mean PHM time, when both engines ran."""
        if "phm" not in self.engines or "baseline" not in self.engines:
            return None
        phm_t = float(np.mean(self.engines["phm"].elapsed))
        base_t = float(np.mean(self.engines["baseline"].elapsed))
        return base_t / phm_t if phm_t > 0 else float("inf")


def _shards(n: int, workers: int) -> List[slice]:
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [slice(bounds[i], bounds[i + 1]) for i in range(workers)]


def _run_phm(records, table, caches, workers) -> matcher.TraceMatch:
    if workers == 1:
        return matcher.match_trace(records, table, caches[0])
    parts = _shards(len(records), workers)
    with ThreadPoolExecutor(workers) as pool:
        results = list(pool.map(lambda i: matcher.match_trace(records[parts[i]], table, caches[i]),
                                range(workers)))
    return matcher.TraceMatch(np.concatenate([r.rule_ids for r in results]),
                              np.concatenate([r.energy_evals for r in results]),
                              sum(r.cache_hits for r in results))


def _run_baseline(records, pset, workers) -> matcher.TraceMatch:
    if workers == 1:
        return baseline.match_trace(records, pset)
    parts = _shards(len(records), workers)
    with ThreadPoolExecutor(workers) as pool:
        results = list(pool.map(lambda p: baseline.match_trace(records[p], pset), parts))
    return matcher.TraceMatch(np.concatenate([r.rule_ids for r in results]),
                              np.concatenate([r.energy_evals for r in results]))


def load_inputs(config: BenchConfig):
    rules = config.rules if config.rules is not None else load_rules(config.rules_path)
    if config.trace is not None:
        trace = config.trace
    elif config.trace_path is not None:
        trace = read_trace(config.trace_path)
    elif config.gen is not None:
        g = config.gen
        trace = generate_trace(TraceGenSpec(g.count, g.seed, g.match, rules))
    else:
        raise ValueError("a trace path or generation parameters are required")
    return rules, trace


def run_benchmark(config: BenchConfig) -> BenchReport:
    rules, trace = load_inputs(config)
    records = trace.to_array()
    n = len(records)
    run_phm = config.engine in ("phm", "both")
    run_base = config.engine in ("baseline", "both")
    reports: Dict[str, EngineReport] = {}

    if run_phm:
        rep = reports["phm"] = EngineReport("phm", n, len(rules))
        t0 = time.perf_counter()
        table = matcher.compile_rules(rules)
        # empty run loads the JIT kernel without touching any cache
        matcher.match_trace(records[:0], table, matcher.LearningCache())
        rep.compile_seconds = time.perf_counter() - t0
    if run_base:
        rep = reports["baseline"] = EngineReport("baseline", n, len(rules))
        t0 = time.perf_counter()
        pset = baseline.compile_baseline(rules, config.baseline_alg)
        baseline.match_trace(records[:0], pset)
        rep.compile_seconds = time.perf_counter() - t0

    caches = [matcher.LearningCache() for _ in range(config.workers)]
    for _ in range(config.repeat):
        phm_out = base_out = None
        if run_phm:
            if config.cache == "fresh":
                caches = [matcher.LearningCache() for _ in range(config.workers)]
            hits_before = sum(c.hits for c in caches)
            t0 = time.perf_counter()
            phm_out = _run_phm(records, table, caches, config.workers)
            elapsed = time.perf_counter() - t0
            rep = reports["phm"]
            rep.elapsed.append(elapsed)
            rep.matches.append(phm_out.match_count)
            rep.energy_evals.append(int(phm_out.energy_evals.sum()))
            rep.cache_hits.append(sum(c.hits for c in caches) - hits_before)
            rep.cache_entries = max(len(c) for c in caches)
        if run_base:
            t0 = time.perf_counter()
            base_out = _run_baseline(records, pset, config.workers)
            elapsed = time.perf_counter() - t0
            rep = reports["baseline"]
            rep.elapsed.append(elapsed)
            rep.matches.append(base_out.match_count)
            rep.energy_evals.append(None)
            rep.cache_hits.append(None)
        if phm_out is not None and base_out is not None:
            diff = np.flatnonzero(phm_out.rule_ids != base_out.rule_ids)
            if len(diff):
                i = int(diff[0])
                raise DifferentialError(i, trace.headers[i], int(phm_out.rule_ids[i]),
                                        int(base_out.rule_ids[i]))
    return BenchReport(reports, config.baseline_alg)


def report_rows(report: BenchReport) -> List[List[str]]:
    rows = []
    for name in ("phm", "baseline"):
        rep = report.engines.get(name)
        if rep is None:
            continue
        for i, elapsed in enumerate(rep.elapsed):
            evals, hits = rep.energy_evals[i], rep.cache_hits[i]
            rows.append([rep.engine, str(rep.packets), str(rep.rules), str(i + 1), repr(elapsed),
                         str(rep.matches[i]), "" if evals is None else str(evals),
                         "" if hits is None else str(hits)])
    return rows


def emit_csv(report, path, append: bool = False) -> None:
    """Write one row per engine per repetition (accepts a report or a list of them)."""
    reports = report if isinstance(report, (list, tuple)) else [report]
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not append:
            writer.writerow(CSV_COLUMNS)
        for rep in reports:
            writer.writerows(report_rows(rep))


def read_report_csv(path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def table2_sweep(rules: Sequence[Rule], packet_counts=None, seed: int = 0,
                 match: float = 0.1, repeat: int = 1, cache: str = "shared",
                 algorithm: str = baseline.BOYER_MOORE) -> List[BenchReport]:
    reports = []
    for count in packet_counts or TABLE2_PACKETS:
        trace = generate_trace(TraceGenSpec(count, seed, match, rules))
        reports.append(run_benchmark(BenchConfig(engine="both", repeat=repeat, cache=cache,
                                                 baseline_alg=algorithm, rules=list(rules),
                                                 trace=trace)))
    return reports


def format_speedups(reports: Sequence[BenchReport]) -> str:
    """Per packet count: mean times, speedup, and improvement next to the published one."""
    lines = [f"{'packets':>8} {'phm_s':>10} {'baseline_s':>10} {'speedup':>8} "
             f"{'improvement':>11} {'published':>9}"]
    for rep in reports:
        phm_t = float(np.mean(rep.engines["phm"].elapsed))
        base_t = float(np.mean(rep.engines["baseline"].elapsed))
        packets = rep.engines["phm"].packets
        published = PUBLISHED_TIMES.get(packets)
        pub = f"{100 * (1 - published[0] / published[1]):>8.1f}%" if published else f"{'-':>9}"
        lines.append(f"{packets:>8} {phm_t:>10.6f} {base_t:>10.6f} {rep.speedup():>8.2f} "
                     f"{100 * (1 - phm_t / base_t):>10.1f}% {pub}")
    return "\n".join(lines)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phm-bench",
                description="Time Packet Header Matching against Boyer-Moore/Horspool "
                            "exact matching on a packet-header trace.")
    p.add_argument("--rules", type=Path, required=True, help="rule file")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--trace", type=Path, help="trace file (PHT1 binary or CSV)")
    src.add_argument("--gen", type=GenParams.parse, metavar="count=N,seed=S,match=F",
                     help="generate a synthetic trace from the rules")
    src.add_argument("--sweep", action="store_true",
                     help="generate traces at each published packet count and report speedups")
    p.add_argument("--engine", choices=ENGINES, default="both")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--baseline-alg", choices=baseline.ALGORITHMS, default=baseline.BOYER_MOORE)
    p.add_argument("--cache", choices=CACHE_MODES, default="shared")
    p.add_argument("--workers", type=int, default=1, help="shard the trace over N workers")
    p.add_argument("--seed", type=int, default=0, help="trace seed for --sweep")
    p.add_argument("--out", type=Path, help="CSV report path (default: stdout)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.trace is None and args.gen is None and not args.sweep:
        parser.error("one of --trace, --gen or --sweep is required")
    if args.repeat < 1:
        parser.error("--repeat must be >= 1")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        rules = load_rules(args.rules)
        if args.sweep:
            reports = table2_sweep(rules, seed=args.seed, repeat=args.repeat, cache=args.cache,
                                   algorithm=args.baseline_alg)
        else:
            config = BenchConfig(args.rules, args.trace, args.gen, args.engine, args.repeat,
                                 args.baseline_alg, args.out, args.cache, args.workers,
                                 rules=rules)
            reports = [run_benchmark(config)]
    except DifferentialError as exc:
        print(f"phm-bench: differential failure: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuleParseError, TraceFormatError, ValueError) as exc:
        print(f"phm-bench: {exc}", file=sys.stderr)
        return 1

    if args.out is not None:
        emit_csv(reports, args.out)
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rep in reports:
            writer.writerows(report_rows(rep))
    if args.sweep:
        print(format_speedups(reports), file=sys.stderr)
    return 0


def gen_main(argv=None) -> int:
    """Write a random rule file and, optionally, a synthetic trace."""
    p = _Parser(prog="phm-gen", description="Generate random rules and synthetic traces.")
    p.add_argument("--rules-out", type=Path, required=True)
    p.add_argument("--count", type=int, default=DEFAULT_RULE_COUNT, help="number of rules")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="write rules as B:<bits>")
    p.add_argument("--trace-out", type=Path)
    p.add_argument("--packets", type=int, default=10000)
    p.add_argument("--match", type=float, default=0.1)
    p.add_argument("--trace-seed", type=int, default=1)
    p.add_argument("--format", choices=(BINARY, CSV), default=BINARY)
    args = p.parse_args(argv)
    try:
        rules = generate_rules(args.count, args.seed)
        write_rules(rules, args.rules_out, raw=args.raw)
        if args.trace_out is not None:
            trace = generate_trace(TraceGenSpec(args.packets, args.trace_seed, args.match, rules))
            write_trace(trace.headers, args.trace_out, args.format)
    except (OSError, ValueError) as exc:
        print(f"phm-gen: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
