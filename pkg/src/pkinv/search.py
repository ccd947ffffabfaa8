"""Inverse folding: start sequence, competitor-driven adjustment and the
interval-driven local search.

Every random choice goes through a ``random.Random`` passed in by the caller,
so a fixed seed reproduces a run exactly.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field, replace
from typing import Iterable

from .loops import IntervalPlan, decompose_intervals
from .oracle import FoldingOracle, FoldRanking
from .structure import (
    ALLOWED_PAIRS,
    DEFAULT_K,
    DEFAULT_LAMBDA,
    DEFAULT_SIGMA,
    NUCLEOTIDES,
    PAIR_LIST,
    Arc,
    ArcNotInStructure,
    IncompatibleSequence,
    Structure,
    is_compatible,
    structure_distance,
    validate_target,
)


@dataclass(frozen=True)
class SearchParams:
    N: int = 50
    adjust_rounds: int | None = None  # None: ceil(sqrt(n) / 2)
    distance_window: int = 5
    stepIII_retries: int = 5
    uphill_probability: float = 0.1
    budget_mult: int = 10
    rng_seed: int = 0
    local_from_best: bool = False  # feed seq_min instead of seq_middle to the local search

    def __post_init__(self) -> None:
        if self.N < 1 or self.distance_window < 1 or self.stepIII_retries < 1 or self.budget_mult < 1:
            raise ValueError("search parameters must be positive")
        if self.adjust_rounds is not None and self.adjust_rounds < 1:
            raise ValueError("adjust_rounds must be positive")
        if not 0.0 <= self.uphill_probability <= 1.0:
            raise ValueError("uphill_probability must lie in [0, 1]")

    def rounds_for(self, n: int) -> int:
        if self.adjust_rounds is not None:
            return self.adjust_rounds
        return max(1, math.ceil(math.sqrt(n) / 2))


# ---------------------------------------------------------------- trace


@dataclass(frozen=True)
class TraceRecord:
    stage: str  # "adjust" or "local"
    round: int
    d: int
    d_min: int
    seq: str
    competitors: int = 0
    mutations: int = 0
    fallbacks: int = 0
    interval: tuple[int, int] | None = None

    def line(self) -> str:
        where = "" if self.interval is None else f" interval={self.interval[0]}-{self.interval[1]}"
        return (
            f"{self.stage} round={self.round} d={self.d} d_min={self.d_min} "
            f"competitors={self.competitors} mutations={self.mutations} fallbacks={self.fallbacks}{where}"
        )


@dataclass
class SearchTrace:
    records: list[TraceRecord] = field(default_factory=list)
    # (full-target distance before, after) for each interval splice
    splices: list[tuple[int, int]] = field(default_factory=list)
    seq_min: str = ""
    d_min: float = math.inf

    def add(self, record: TraceRecord) -> None:
        self.records.append(record)

    @property
    def fallbacks(self) -> int:
        return sum(r.fallbacks for r in self.records)

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]


@dataclass(frozen=True)
class Failure:
    seq_min: str
    d_min: int
    trace: SearchTrace

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class Success:
    seq: str
    trace: SearchTrace


# ---------------------------------------------------------------- MAKE-START


def make_start(target: Structure, rng: random.Random) -> str:
    """Uniform random sequence compatible with ``target``."""
    seq = [""] * (target.n + 1)
    partner = target.partner
    for w in range(1, target.n + 1):
        p = partner[w]
        if p == 0:
            seq[w] = rng.choice(NUCLEOTIDES)
        elif p > w:
            pair = rng.choice(PAIR_LIST)
            seq[w], seq[p] = pair[0], pair[1]
    return "".join(seq[1:])


# ---------------------------------------------------------------- competitors


def perturb_arc(structure: Structure, arc: Arc) -> list[frozenset[Arc]]:
    """The arc sets obtained by keeping ``arc``, shifting either end by at most
    one, or removing it. Shifts leaving ``[1, n]`` or collapsing the arc are
    dropped; shifts onto occupied positions are kept for the caller to filter.
    """
    if arc not in structure.arcs:
        raise ArcNotInStructure(arc)
    i, j = arc
    rest = structure.arcs - {arc}
    out = [structure.arcs]
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            a, b = i + di, j + dj
            if a < 1 or b > structure.n or a >= b:
                continue
            out.append(rest | {(a, b)})
    out.append(rest)
    return out


def is_consistent(arcs: Iterable[Arc], n: int) -> bool:
    seen: set[int] = set()
    for i, j in arcs:
        if not 1 <= i < j <= n or j == i + 1 or i in seen or j in seen:
            return False
        seen.add(i)
        seen.add(j)
    return True


@dataclass(frozen=True)
class CompetitorSet:
    structures: tuple[Structure, ...]
    origin: tuple[tuple[int, Arc], ...]  # (ranking index, perturbed arc) per competitor

    def __len__(self) -> int:
        return len(self.structures)


def build_competitors(ranking: FoldRanking, seq: str, target: Structure) -> CompetitorSet:
    seen: set[frozenset[Arc]] = {target.arcs}
    structures: list[Structure] = []
    origin: list[tuple[int, Arc]] = []
    n = len(seq)
    for h, entry in enumerate(ranking.entries):
        s = entry.structure
        for arc in s.sorted_arcs:
            for arcs in perturb_arc(s, arc):
                if arcs in seen:
                    continue
                seen.add(arcs)
                if not is_consistent(arcs, n):
                    continue
                if any(seq[i - 1] + seq[j - 1] not in ALLOWED_PAIRS for i, j in arcs):
                    continue
                structures.append(Structure(n, arcs))
                origin.append((h, arc))
    return CompetitorSet(tuple(structures), tuple(origin))


@dataclass(frozen=True)
class MutationResult:
    seq: str
    mutated: tuple[int, ...]
    fallbacks: tuple[int, ...]  # positions where no competitor-avoiding choice existed


def _competitor_partners(target: Structure, competitors: CompetitorSet) -> list[set[int]]:
    """Per position, the partners competitors give it that differ from the target's
    (0 for unpaired)."""
    n = target.n
    tp = target.partner
    diff: list[set[int]] = [set() for _ in range(n + 1)]
    count = [0] * (n + 1)
    for c in competitors.structures:
        for i, j in c.arcs:
            count[i] += 1
            count[j] += 1
            if tp[i] != j:
                diff[i].add(j)
                diff[j].add(i)
    total = len(competitors)
    for w in range(1, n + 1):
        if tp[w] and count[w] < total:
            diff[w].add(0)
    return diff


def mutate_against_competitors(
    seq: str, target: Structure, competitors: CompetitorSet, rng: random.Random
) -> MutationResult:
    if not is_compatible(seq, target):
        raise IncompatibleSequence("sequence is not compatible with the target")
    if not competitors.structures:
        return MutationResult(seq, (), ())
    diff = _competitor_partners(target, competitors)
    tp = target.partner
    old = seq
    new = list(seq)
    mutated: list[int] = []
    fallbacks: list[int] = []
    for w in range(1, target.n + 1):
        if not diff[w]:
            continue
        rivals = [old[u - 1] for u in diff[w] if u]
        v = tp[w]
        if v == 0:
            others = [b for b in NUCLEOTIDES if b != old[w - 1]]
            choices = [b for b in others if all(b + r not in ALLOWED_PAIRS for r in rivals)]
            if not choices:
                choices = others
                fallbacks.append(w)
            new[w - 1] = rng.choice(choices)
            mutated.append(w)
        elif v > w:
            current = old[w - 1] + old[v - 1]
            others = [p for p in PAIR_LIST if p != current]
            choices = [p for p in others if all(p[0] + r not in ALLOWED_PAIRS for r in rivals)]
            if not choices:
                choices = others
                fallbacks.append(w)
            pair = rng.choice(choices)
            new[w - 1], new[v - 1] = pair[0], pair[1]
            mutated.extend((w, v))
        # end-points were handled together with their start-point
    return MutationResult("".join(new), tuple(sorted(mutated)), tuple(fallbacks))


# ---------------------------------------------------------------- ADJUST-SEQ


@dataclass(frozen=True)
class AdjustResult:
    seq_middle: str
    seq_min: str
    d_min: int
    solved: bool
    rounds: int


def _mfe_distance(oracle: FoldingOracle, seq: str, target: Structure, N: int) -> tuple[int, FoldRanking]:
    ranking = oracle.fold(seq, N)
    return structure_distance(ranking.mfe, target), ranking


def adjust_seq(
    start: str,
    target: Structure,
    oracle: FoldingOracle,
    params: SearchParams,
    rng: random.Random,
    trace: SearchTrace | None = None,
) -> AdjustResult:
    if not is_compatible(start, target):
        raise IncompatibleSequence("start sequence is not compatible with the target")
    trace = trace if trace is not None else SearchTrace()
    d_min = math.inf
    seq_min = start
    seq_middle = start
    lam = start
    rounds = params.rounds_for(target.n)
    for i in range(1, rounds + 1):
        # Step I
        d, ranking = _mfe_distance(oracle, lam, target, params.N)
        if d == 0:
            trace.add(TraceRecord("adjust", i, 0, 0, lam))
            trace.seq_min, trace.d_min = lam, 0
            return AdjustResult(lam, lam, 0, True, i)
        if d < d_min:
            d_min, seq_min = d, lam
        # Step II
        competitors = build_competitors(ranking, lam, target)
        # Step III, repeated while the result falls outside the window
        best: tuple[int, str] | None = None
        mutations = fallbacks = 0
        accepted = False
        for _ in range(params.stepIII_retries):
            result = mutate_against_competitors(lam, target, competitors, rng)
            mutations += len(result.mutated)
            fallbacks += len(result.fallbacks)
            dc, _ = _mfe_distance(oracle, result.seq, target, params.N)
            if best is None or dc < best[0]:
                best = (dc, result.seq)
            if dc < d_min + params.distance_window:
                seq_middle = result.seq
                lam = result.seq
                accepted = True
                break
        if not accepted:
            assert best is not None
            lam = best[1]
        trace.add(TraceRecord("adjust", i, d, int(d_min), lam, len(competitors), mutations, fallbacks))
    trace.seq_min, trace.d_min = seq_min, d_min
    return AdjustResult(seq_middle, seq_min, int(d_min), False, rounds)


# ---------------------------------------------------------------- LOCAL-SEARCH


def _mutate_position(seq: list[str], w: int, target: Structure, rng: random.Random) -> None:
    """Random target-compatible change at ``w`` (its partner moves along)."""
    v = target.partner[w]
    if v == 0:
        seq[w - 1] = rng.choice([b for b in NUCLEOTIDES if b != seq[w - 1]])
        return
    a, b = (w, v) if w < v else (v, w)
    current = seq[a - 1] + seq[b - 1]
    pair = rng.choice([p for p in PAIR_LIST if p != current])
    seq[a - 1], seq[b - 1] = pair[0], pair[1]


def _touched_positions(fold: Structure, target: Structure) -> tuple[list[int], list[Arc]]:
    """Unpaired target positions and target arcs that are mispaired in
    ``fold`` or sit next to a mispaired position."""
    fp, tp = fold.partner, target.partner
    n = target.n
    bad = [w for w in range(1, n + 1) if fp[w] != tp[w]]
    near = set()
    for w in bad:
        near.update(x for x in (w - 1, w, w + 1) if 1 <= x <= n)
    u1 = sorted(w for w in near if tp[w] == 0)
    u2 = sorted({(min(w, tp[w]), max(w, tp[w])) for w in near if tp[w]})
    return u1, u2


def _local_interval(
    sub: str,
    target: Structure,
    oracle: FoldingOracle,
    params: SearchParams,
    rng: random.Random,
    trace: SearchTrace,
    interval: tuple[int, int],
    frozen: frozenset[int] = frozenset(),
    context: tuple[str, str] = ("", ""),
) -> str:
    """Local search on one interval. ``frozen`` holds positions (relative to
    the interval) paired outside it, which are never mutated; ``context`` is
    the sequence around the interval, used for the trace snapshots."""

    def fold(s: str) -> tuple[int, float]:
        entry = oracle.fold(s, 1).entries[0]
        return structure_distance(entry.structure, target), entry.energy

    seq = sub
    d_min, _ = fold(seq)
    best = seq
    budget = params.budget_mult * target.n
    runs = 0
    while d_min > 0 and runs < budget:
        runs += 1
        # Phase I
        current = oracle.fold(seq, 1).mfe
        u1, u2 = _touched_positions(current, target)
        u1 = [p for p in u1 if p not in frozen]
        # Phase II
        candidates = []
        for p in u1:
            s = list(seq)
            _mutate_position(s, p, target, rng)
            candidates.append("".join(s))
        for p, _ in u2:
            s = list(seq)
            _mutate_position(s, p, target, rng)
            candidates.append("".join(s))
        pool: list[tuple[float, str]] = []
        moved = False
        for cand in candidates:
            d, e = fold(cand)
            if d < d_min:
                d_min, seq, best = d, cand, cand
                moved = True
                break
            if d_min < d < d_min + params.distance_window:
                if rng.random() < params.uphill_probability:
                    seq = cand
                    moved = True
                    break
            elif d == d_min:
                pool.append((e, cand))
        if not moved and pool:
            seq = min(pool)[1]
            if fold(seq)[0] == d_min:
                best = seq
        full = context[0] + seq + context[1]
        trace.add(TraceRecord("local", runs, fold(seq)[0], d_min, full, interval=interval))
    return best


def local_search(
    seq_middle: str,
    target: Structure,
    plan: IntervalPlan,
    oracle: FoldingOracle,
    params: SearchParams,
    rng: random.Random,
    trace: SearchTrace | None = None,
) -> str:
    if not is_compatible(seq_middle, target):
        raise IncompatibleSequence("sequence is not compatible with the target")
    trace = trace if trace is not None else SearchTrace()
    seq = seq_middle
    if oracle.fold(seq, 1).mfe == target:
        return seq
    for left, right in plan:
        sub_target = target.restrict(left, right)
        sub = seq[left - 1 : right]
        before = structure_distance(oracle.fold(seq, 1).mfe, target)
        frozen = frozenset(
            w - left + 1 for w in range(left, right + 1) if target.partner[w] and not left <= target.partner[w] <= right
        )
        context = (seq[: left - 1], seq[right:])
        solved = _local_interval(sub, sub_target, oracle, params, rng, trace, (left, right), frozen, context)
        seq = seq[: left - 1] + solved + seq[right:]
        after = structure_distance(oracle.fold(seq, 1).mfe, target)
        trace.splices.append((before, after))
        if after == 0:
            break
    return seq


# ---------------------------------------------------------------- Inv


def inv(
    target: Structure,
    oracle: FoldingOracle,
    params: SearchParams = SearchParams(),
    rng: random.Random | None = None,
    k: int = DEFAULT_K,
    sigma: int = DEFAULT_SIGMA,
    lam: int = DEFAULT_LAMBDA,
) -> Success | Failure:
    """Search for a sequence whose mfe structure under ``oracle`` is ``target``.

    Raises InvalidTarget when the target fails validation.
    """
    validate_target(target, k, sigma, lam)
    rng = rng if rng is not None else random.Random(params.rng_seed)
    trace = SearchTrace()
    start = make_start(target, rng)
    adjusted = adjust_seq(start, target, oracle, params, rng, trace)
    if adjusted.solved:
        seq = adjusted.seq_middle
    else:
        plan = decompose_intervals(target)
        begin = adjusted.seq_min if params.local_from_best else adjusted.seq_middle
        seq = local_search(begin, target, plan, oracle, params, rng, trace)
    # never trust the search: verify with a fresh fold
    for cand in (seq, adjusted.seq_min):
        if oracle.fold(cand, 1).mfe == target:
            return Success(cand, trace)
    d_seq = structure_distance(oracle.fold(seq, 1).mfe, target)
    if d_seq < adjusted.d_min:
        return Failure(seq, d_seq, trace)
    return Failure(adjusted.seq_min, adjusted.d_min, trace)


@dataclass(frozen=True)
class TrialRecord:
    target_id: str
    seed: int
    success: bool
    rounds: int
    distance: int
    time_ms: int
    seq: str

    def summary_line(self, with_time: bool = True) -> str:
        ms = self.time_ms if with_time else "-"
        return f"{self.target_id} {self.seed} {int(self.success)} {self.rounds} {self.distance} {ms}"


def run_trial(
    target_id: str,
    target: Structure,
    oracle: FoldingOracle,
    params: SearchParams,
    seed: int,
    **limits,
) -> tuple[TrialRecord, Success | Failure]:
    t0 = time.perf_counter()
    result = inv(target, oracle, replace(params, rng_seed=seed), random.Random(seed), **limits)
    elapsed = int((time.perf_counter() - t0) * 1000)
    rounds = len(result.trace.records)
    if isinstance(result, Success):
        rec = TrialRecord(target_id, seed, True, rounds, 0, elapsed, result.seq)
    else:
        rec = TrialRecord(target_id, seed, False, rounds, result.d_min, elapsed, result.seq_min)
    return rec, result
