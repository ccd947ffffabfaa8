"""Command-line front end.

    pkinv inv --target '(((:[[[:::))):::]]]' --trials 5
    pkinv fold GGGAAACCCAAAGGGAAACCC --N 5
    pkinv decompose '((((::::))))'
    pkinv enumerate 14
    pkinv stats --targets-file targets.txt --trials 20

Exit codes: 0 success, 2 invalid target, 3 sequence or target longer than the
enumeration cap, 4 no trial succeeded.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

from .loops import decompose_loops
from .oracle import (
    DEFAULT_CAP,
    DEFAULT_MODEL,
    CapExceeded,
    EnergyModel,
    ExhaustiveOracle,
    NussinovOracle,
    enumerate_structures,
)
from .search import SearchParams, TrialRecord, run_trial
from .structure import (
    DEFAULT_LAMBDA,
    DEFAULT_SIGMA,
    InvalidTarget,
    Structure,
    check_structure,
    serialize_structure,
)

DEFAULT_SEED = 20100101

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CAP = 3
EXIT_FAILED = 4


@dataclass(frozen=True)
class StatsRow:
    target_id: str
    n: int
    trials: int
    successes: int
    mean_rounds: float
    median_rounds: float
    mean_ms: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def line(self) -> str:
        return (
            f"{self.target_id}\t{self.n}\t{self.trials}\t{self.successes}\t{self.rate:.3f}\t"
            f"{self.mean_rounds:.1f}\t{self.median_rounds:.1f}\t{self.mean_ms:.1f}"
        )


STATS_HEADER = "target\tn\ttrials\tsuccesses\trate\tmean_rounds\tmedian_rounds\tmean_ms"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pkinv", description="Inverse folding of RNA pseudoknot structures.")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--sigma", type=int, default=DEFAULT_SIGMA, help="minimum stack size")
        p.add_argument("--lambda", dest="lam", type=int, default=DEFAULT_LAMBDA, help="minimum arc length")
        p.add_argument("--energy-file", type=Path, help="energy model as key = value lines")
        p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration length cap")

    def search_flags(p: argparse.ArgumentParser) -> None:
        model_flags(p)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--N", type=int, default=50, help="suboptimal list size")
        p.add_argument("--oracle", choices=("exhaustive", "nussinov"), default="exhaustive")
        p.add_argument("--uphill-prob", type=float, default=0.1)
        p.add_argument("--budget-mult", type=int, default=10)
        p.add_argument("--summary", type=Path, help="append one record per trial to this file")
        p.add_argument("--no-time", action="store_true", help="write '-' instead of time_ms in summary records")
        p.add_argument("--verbose", "-v", action="store_true", help="print the search trace")

    p = sub.add_parser("inv", help="design sequences for a target")
    p.add_argument("--target", help="structure string, or a file of targets")
    p.add_argument("--targets-file", type=Path)
    search_flags(p)

    p = sub.add_parser("stats", help="success rates and timings over a batch of targets")
    p.add_argument("--targets-file", type=Path, required=True)
    p.add_argument("--points", action="store_true", help="also print mean time per length")
    search_flags(p)

    p = sub.add_parser("fold", help="print the N best structures of a sequence")
    p.add_argument("sequence")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--oracle", choices=("exhaustive", "nussinov"), default="exhaustive")
    model_flags(p)

    p = sub.add_parser("decompose", help="print the loop decomposition of a structure")
    p.add_argument("structure")

    p = sub.add_parser("enumerate", help="list every canonical structure on n positions")
    p.add_argument("n", type=int)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--count", action="store_true", help="print only the number of structures")
    model_flags(p)
    return parser


def _model(args: argparse.Namespace) -> EnergyModel:
    return EnergyModel.from_file(args.energy_file) if args.energy_file else DEFAULT_MODEL


def _oracle(args: argparse.Namespace):
    if args.oracle == "nussinov":
        return NussinovOracle(_model(args), sigma=args.sigma, lam=args.lam)
    return ExhaustiveOracle(_model(args), sigma=args.sigma, lam=args.lam, cap=args.cap)


def _targets(args: argparse.Namespace) -> list[tuple[str, str]]:
    """(id, text) pairs; texts are validated later so errors carry the id."""
    out: list[tuple[str, str]] = []
    files = []
    if getattr(args, "target", None):
        path = Path(args.target)
        if path.is_file():
            files.append(path)
        else:
            out.append(("target", args.target))
    if args.targets_file:
        files.append(args.targets_file)
    for path in files:
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            out.append((parts[0], parts[1]) if len(parts) > 1 else (f"line{lineno}", parts[0]))
    return out


def _run_trials(args, out: TextIO, err: TextIO, emit_sequences: bool) -> tuple[int, list[tuple[str, Structure, list[TrialRecord]]]]:
    if args.trials < 1:
        err.write("--trials must be at least 1\n")
        return EXIT_INVALID, []
    k = 2 if args.oracle == "nussinov" else 3
    parsed = []
    for tid, text in _targets(args):
        try:
            parsed.append((tid, check_structure(text, k=k, sigma=args.sigma, lam=args.lam)))
        except InvalidTarget as exc:
            err.write(f"incorrect structure {tid}: {exc.reason}\n")
            return EXIT_INVALID, []
    oracle = _oracle(args)
    params = SearchParams(N=args.N, uphill_probability=args.uphill_prob, budget_mult=args.budget_mult, rng_seed=args.seed)
    summary = args.summary.open("a") if args.summary else None
    results = []
    try:
        for tid, target in parsed:
            if args.oracle == "exhaustive" and target.n > args.cap:
                err.write(f"target {tid} has length {target.n}, above the enumeration cap {args.cap}\n")
                return EXIT_CAP, results
            records = []
            for t in range(args.trials):
                seed = args.seed + t
                rec, res = run_trial(tid, target, oracle, params, seed, sigma=args.sigma, lam=args.lam)
                records.append(rec)
                if args.verbose:
                    for line in res.trace.lines():
                        err.write(f"{tid} seed={seed} {line}\n")
                if emit_sequences and rec.success:
                    out.write(f"{rec.seq}\n{serialize_structure(target)}\n")
                if summary:
                    summary.write(rec.summary_line(with_time=not args.no_time) + "\n")
            results.append((tid, target, records))
    finally:
        if summary:
            summary.close()
    return EXIT_OK, results


def run_inv(args: argparse.Namespace, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    if not args.target and not args.targets_file:
        err.write("inv needs --target or --targets-file\n")
        return EXIT_INVALID
    status, results = _run_trials(args, out, err, emit_sequences=True)
    if status != EXIT_OK:
        return status
    total = sum(len(r) for _, _, r in results)
    wins = sum(rec.success for _, _, r in results for rec in r)
    out.write(f"# {wins}/{total} trials succeeded\n")
    return EXIT_OK if wins else EXIT_FAILED


def run_stats(args: argparse.Namespace, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    status, results = _run_trials(args, out, err, emit_sequences=False)
    if status != EXIT_OK:
        return status
    rows = []
    for tid, target, records in results:
        rounds = [r.rounds for r in records]
        rows.append(
            StatsRow(
                tid,
                target.n,
                len(records),
                sum(r.success for r in records),
                statistics.fmean(rounds),
                statistics.median(rounds),
                statistics.fmean(r.time_ms for r in records),
            )
        )
    out.write(STATS_HEADER + "\n")
    for row in rows:
        out.write(row.line() + "\n")
    if args.points and rows:
        out.write("# n\tmean_ms\n")
        by_n: dict[int, list[float]] = {}
        for row in rows:
            by_n.setdefault(row.n, []).append(row.mean_ms)
        for n in sorted(by_n):
            out.write(f"{n}\t{statistics.fmean(by_n[n]):.1f}\n")
    return EXIT_OK


def run_fold(args: argparse.Namespace, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    seq = args.sequence.strip().upper().replace("T", "U")
    try:
        ranking = _oracle(args).fold(seq, args.N)
    except CapExceeded as exc:
        err.write(f"{exc}\n")
        return EXIT_CAP
    except ValueError as exc:
        err.write(f"{exc}\n")
        return EXIT_INVALID
    for entry in ranking.entries:
        out.write(f"{serialize_structure(entry.structure)}\t{entry.energy:g}\n")
    return EXIT_OK


def run_decompose(args: argparse.Namespace, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    try:
        structure = check_structure(args.structure, sigma=1, lam=1)
    except InvalidTarget as exc:
        err.write(f"incorrect structure: {exc.reason}\n")
        return EXIT_INVALID
    out.write(decompose_loops(structure).dump())
    return EXIT_OK


def run_enumerate(args: argparse.Namespace, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    try:
        count = 0
        for s in enumerate_structures(args.n, args.k, args.sigma, args.lam, args.cap):
            count += 1
            if not args.count:
                out.write(serialize_structure(s) + "\n")
    except CapExceeded as exc:
        err.write(f"{exc}\n")
        return EXIT_CAP
    except ValueError as exc:
        err.write(f"{exc}\n")
        return EXIT_INVALID
    if args.count:
        out.write(f"{count}\n")
    return EXIT_OK


COMMANDS = {
    "inv": run_inv,
    "stats": run_stats,
    "fold": run_fold,
    "decompose": run_decompose,
    "enumerate": run_enumerate,
}


def main(argv: list[str] | None = None, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    args = _build_parser().parse_args(argv)
    return COMMANDS[args.command](args, out, err)


if __name__ == "__main__":
    sys.exit(main())
