"""Folding oracles: exhaustive enumeration over canonical 3-noncrossing
structures with a small stacking energy model, and an interval DP for the
noncrossing case.

Structures are built from helices: maximal stacks ``(i, j, size)`` whose
outer arc is ``(i, j)``. Helices are placed in order of their left end, and a
helix may not sit directly inside or outside another one (that would merge
two stacks into a longer one), so each structure is produced exactly once.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterator, Protocol, Sequence

from .structure import (
    ALLOWED_PAIRS,
    DEFAULT_K,
    DEFAULT_LAMBDA,
    DEFAULT_SIGMA,
    PAIR_LIST,
    IncompatibleSequence,
    Structure,
    check_sequence,
    is_compatible,
    stacks,
)

DEFAULT_CAP = 36

_PAIR_STRENGTH = {"GC": -3.0, "CG": -3.0, "AU": -2.0, "UA": -2.0, "GU": -1.0, "UG": -1.0}


class CapExceeded(ValueError):
    pass


def default_stack_scores() -> dict[tuple[str, str], float]:
    # an adjacency scores as its weaker pair
    return {(p, q): max(_PAIR_STRENGTH[p], _PAIR_STRENGTH[q]) for p, q in product(PAIR_LIST, repeat=2)}


@dataclass(frozen=True)
class EnergyModel:
    """Toy stacking model.

    ``stack_scores[(outer_pair, inner_pair)]`` scores two stacked base pairs,
    e.g. ``("GC", "AU")`` for an outer G-C closing an inner A-U.
    """

    stack_scores: dict[tuple[str, str], float] = field(default_factory=default_stack_scores)
    unpaired_penalty: float = 0.0
    pseudoknot_penalty: float = 2.0

    def __post_init__(self) -> None:
        missing = set(product(PAIR_LIST, repeat=2)) - set(self.stack_scores)
        if missing:
            raise ValueError(f"stack scores missing for {sorted(missing)[:3]}...")
        if any(v > 0 for v in self.stack_scores.values()):
            raise ValueError("stack scores must be <= 0")
        if self.unpaired_penalty < 0 or self.pseudoknot_penalty < 0:
            raise ValueError("penalties must be >= 0")

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.stack_scores.items())), self.unpaired_penalty, self.pseudoknot_penalty))

    @classmethod
    def from_text(cls, text: str) -> "EnergyModel":
        """Read ``key = value`` lines.

        Keys: ``unpaired_penalty``, ``pseudoknot_penalty``, ``pair.XY`` (sets
        the strength of pair XY; adjacencies score as their weaker pair) and
        ``stack.XY.ZW`` (overrides one adjacency). ``#`` starts a comment.
        """
        strengths = dict(_PAIR_STRENGTH)
        overrides: dict[tuple[str, str], float] = {}
        params: dict[str, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            number = float(value)
            parts = key.split(".")
            if parts[0] == "pair" and len(parts) == 2 and parts[1] in ALLOWED_PAIRS:
                strengths[parts[1]] = number
            elif parts[0] == "stack" and len(parts) == 3 and {parts[1], parts[2]} <= ALLOWED_PAIRS:
                overrides[(parts[1], parts[2])] = number
            elif key in ("unpaired_penalty", "pseudoknot_penalty"):
                params[key] = number
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
        scores = {(p, q): max(strengths[p], strengths[q]) for p, q in product(PAIR_LIST, repeat=2)}
        scores.update(overrides)
        return cls(scores, **params)

    @classmethod
    def from_file(cls, path: str | Path) -> "EnergyModel":
        return cls.from_text(Path(path).read_text())


DEFAULT_MODEL = EnergyModel()


def pseudoknot_count(structure: Structure) -> int:
    from .loops import LoopKind, decompose_loops

    return len(decompose_loops(structure).loops_of_kind(LoopKind.PSEUDOKNOT))


def stacking_energy(seq: str, structure: Structure, model: EnergyModel = DEFAULT_MODEL) -> float:
    total = 0.0
    scores = model.stack_scores
    for st in stacks(structure):
        for (i, j), (k, l) in zip(st.arcs, st.arcs[1:]):
            total += scores[(seq[i - 1] + seq[j - 1], seq[k - 1] + seq[l - 1])]
    return total


def energy(seq: str, structure: Structure, model: EnergyModel = DEFAULT_MODEL) -> float:
    if not is_compatible(seq, structure):
        raise IncompatibleSequence(f"{seq} cannot pair as the structure requires")
    value = stacking_energy(seq, structure, model)
    value += model.unpaired_penalty * len(structure.unpaired_positions)
    if model.pseudoknot_penalty:
        value += model.pseudoknot_penalty * pseudoknot_count(structure)
    return value


# ---------------------------------------------------------------- helix enumeration

Helix = tuple[int, int, int]


def _helix_pseudoknots(helices: Sequence[Helix]) -> int:
    """Pseudoknot loops of a helix set, working on innermost arcs only.

    Crossing between helices is uniform over their arcs, and only innermost
    arcs can be minimal crossings, so the count matches the full loop
    decomposition at a fraction of the cost.
    """
    inner = [(i + s - 1, j - s + 1) for i, j, s in helices]
    outer = [(i, j) for i, j, _ in helices]
    m = len(helices)
    cross = [[False] * m for _ in range(m)]
    for a in range(m):
        ia, ja = outer[a]
        for b in range(a + 1, m):
            ib, jb = outer[b]
            if ia < ib < ja < jb or ib < ia < jb < ja:
                cross[a][b] = cross[b][a] = True
    in_p = [False] * m
    for beta in range(m):
        crossers = [a for a in range(m) if cross[beta][a]]
        for a in crossers:
            ia, ja = inner[a]
            # a is minimal if no other crosser sits strictly inside it
            if not any(ia < outer[c][0] and outer[c][1] < ja for c in crossers if c != a):
                in_p[a] = True
    members = [a for a in range(m) if in_p[a]]
    seen: set[int] = set()
    comps = 0
    for a in members:
        if a in seen:
            continue
        comps += 1
        frontier = [a]
        seen.add(a)
        while frontier:
            x = frontier.pop()
            for y in members:
                if y not in seen and cross[x][y]:
                    seen.add(y)
                    frontier.append(y)
    return comps


def _arcs_of(helices: Sequence[Helix]) -> frozenset[tuple[int, int]]:
    return frozenset((i + t, j - t) for i, j, s in helices for t in range(s))


def _walk(
    n: int,
    candidates: list[list[tuple[int, int, float]]],
    k: int,
) -> Iterator[tuple[list[Helix], float, bool]]:
    """Yield (helices, stacking energy, has_crossing) for every structure.

    ``candidates[i]`` lists ``(j, size, stacking)`` for helices with outer arc
    ``(i, j)``.
    """
    used = [False] * (n + 2)
    partner = [0] * (n + 2)
    placed: list[Helix] = []

    def place_ok(i: int, j: int, s: int) -> tuple[bool, bool]:
        for t in range(s):
            if used[i + t] or used[j - t]:
                return False, False
        # directly inside another helix: the two would be one stack
        if partner[i - 1] == j + 1:
            return False, False
        crossers = [g for g in placed if g[0] < i < g[1] < j]
        if crossers and k <= 2:
            return False, False
        if k == 3:
            for x in range(len(crossers)):
                ax, bx, _ = crossers[x]
                for y in range(x + 1, len(crossers)):
                    ay, by, _ = crossers[y]
                    if ax < ay < bx < by or ay < ax < by < bx:
                        return False, False
        return True, bool(crossers)

    def rec(pos: int, stack_e: float, crossed: bool) -> Iterator[tuple[list[Helix], float, bool]]:
        while pos <= n and used[pos]:
            pos += 1
        if pos > n:
            yield placed, stack_e, crossed
            return
        yield from rec(pos + 1, stack_e, crossed)
        for j, s, e in candidates[pos]:
            ok, crosses = place_ok(pos, j, s)
            if not ok:
                continue
            for t in range(s):
                used[pos + t] = used[j - t] = True
            partner[pos + s - 1], partner[j - s + 1] = j - s + 1, pos + s - 1
            placed.append((pos, j, s))
            yield from rec(pos + s, stack_e + e, crossed or crosses)
            placed.pop()
            partner[pos + s - 1] = partner[j - s + 1] = 0
            for t in range(s):
                used[pos + t] = used[j - t] = False

    yield from rec(1, 0.0, False)


def _all_candidates(n: int, sigma: int, lam: int, can_pair=None, scorer=None) -> list[list[tuple[int, int, float]]]:
    candidates: list[list[tuple[int, int, float]]] = [[] for _ in range(n + 2)]
    for i in range(1, n + 1):
        for j in range(n, i, -1):
            s = 0
            e = 0.0
            while True:
                a, b = i + s, j - s
                if b - a < lam:
                    break
                if can_pair is not None and not can_pair(a, b):
                    break
                if s > 0 and scorer is not None:
                    e += scorer(a - 1, b + 1, a, b)
                s += 1
                if s >= sigma:
                    candidates[i].append((j, s, e))
    for row in candidates:
        row.sort()
    return candidates


def enumerate_structures(
    n: int,
    k: int = DEFAULT_K,
    sigma: int = DEFAULT_SIGMA,
    lam: int = DEFAULT_LAMBDA,
    cap: int = DEFAULT_CAP,
) -> Iterator[Structure]:
    """Every structure on ``n`` positions with crossing number below ``k``,
    arcs of length at least ``lam`` and stacks of size at least ``sigma``."""
    if n > cap:
        raise CapExceeded(f"n = {n} exceeds the enumeration cap {cap}")
    if k > 3:
        raise ValueError("only k <= 3 is supported")
    candidates = _all_candidates(n, sigma, lam)
    for helices, _, _ in _walk(n, candidates, k):
        yield Structure(n, _arcs_of(helices))


# ---------------------------------------------------------------- oracles


@dataclass(frozen=True)
class RankedStructure:
    structure: Structure
    energy: float


@dataclass(frozen=True)
class FoldRanking:
    query: str
    entries: tuple[RankedStructure, ...]

    @property
    def mfe(self) -> Structure:
        return self.entries[0].structure

    @property
    def structures(self) -> list[Structure]:
        return [e.structure for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


class FoldingOracle(Protocol):
    model: EnergyModel

    def fold(self, seq: str, N: int = 1) -> FoldRanking: ...


def _rank_key(e: float, arcs: tuple[tuple[int, int], ...]) -> tuple:
    return (round(e, 9), arcs)


class ExhaustiveOracle:
    """Scores every canonical structure compatible with the sequence.

    Results are memoised per (sequence, N); the object is otherwise immutable
    and can be shared between threads.
    """

    def __init__(
        self,
        model: EnergyModel = DEFAULT_MODEL,
        k: int = DEFAULT_K,
        sigma: int = DEFAULT_SIGMA,
        lam: int = DEFAULT_LAMBDA,
        cap: int = DEFAULT_CAP,
        cache_size: int = 200_000,
    ):
        if k > 3:
            raise ValueError("only k <= 3 is supported")
        self.model = model
        self.k = k
        self.sigma = sigma
        self.lam = lam
        self.cap = cap
        self._cache: dict[tuple[str, int], FoldRanking] = {}
        self._cache_size = cache_size
        self.calls = 0

    def candidates(self, seq: str) -> list[list[tuple[int, int, float]]]:
        scores = self.model.stack_scores

        def can_pair(a: int, b: int) -> bool:
            return seq[a - 1] + seq[b - 1] in ALLOWED_PAIRS

        def scorer(oa: int, ob: int, ia: int, ib: int) -> float:
            return scores[(seq[oa - 1] + seq[ob - 1], seq[ia - 1] + seq[ib - 1])]

        return _all_candidates(len(seq), self.sigma, self.lam, can_pair, scorer)

    def scan(self, seq: str) -> Iterator[tuple[float, list[Helix]]]:
        """Every compatible structure with its energy, as helix lists."""
        n = len(seq)
        unpaired = self.model.unpaired_penalty
        pk = self.model.pseudoknot_penalty
        for helices, stack_e, crossed in _walk(n, self.candidates(seq), self.k):
            e = stack_e
            if unpaired:
                e += unpaired * (n - 2 * sum(s for _, _, s in helices))
            if crossed and pk:
                e += pk * _helix_pseudoknots(helices)
            yield e, helices

    def fold(self, seq: str, N: int = 1) -> FoldRanking:
        check_sequence(seq)
        if len(seq) > self.cap:
            raise CapExceeded(f"sequence length {len(seq)} exceeds the enumeration cap {self.cap}")
        key = (seq, N)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        self.calls += 1
        # bounded max-heap on (energy, arcs); arcs only materialised when needed
        heap: list[tuple[tuple, tuple]] = []
        for e, helices in self.scan(seq):
            e = round(e, 9)
            if len(heap) == N and heap[0][1][0] < e:
                continue
            arcs = tuple(sorted(_arcs_of(helices)))
            key_ = (e, arcs)
            if len(heap) < N:
                heapq.heappush(heap, (_neg(key_), key_))
            elif key_ < heap[0][1]:
                heapq.heapreplace(heap, (_neg(key_), key_))
        ranked = sorted(k for _, k in heap)
        n = len(seq)
        ranking = FoldRanking(seq, tuple(RankedStructure(Structure(n, frozenset(a)), e) for e, a in ranked))
        if len(self._cache) >= self._cache_size:
            self._cache.clear()
        self._cache[key] = ranking
        return ranking

    def mfe(self, seq: str) -> Structure:
        return self.fold(seq, 1).mfe


class _neg:
    """Order-reversing wrapper so heapq keeps the worst entry on top."""

    __slots__ = ("key",)

    def __init__(self, key):
        self.key = key

    def __lt__(self, other: "_neg") -> bool:
        return other.key < self.key

    def __eq__(self, other) -> bool:
        return self.key == other.key

    def __getitem__(self, idx):
        return self.key[idx]


def fold(seq: str, N: int = 1, model: EnergyModel = DEFAULT_MODEL, **kwargs) -> FoldRanking:
    return ExhaustiveOracle(model, **kwargs).fold(seq, N)


# ---------------------------------------------------------------- interval DP


def nussinov_fold(
    seq: str,
    sigma: int = DEFAULT_SIGMA,
    lam: int = DEFAULT_LAMBDA,
    model: EnergyModel = DEFAULT_MODEL,
) -> tuple[Structure, float]:
    """Minimum-energy noncrossing canonical structure by interval DP.

    ``open_[i][j]`` is the best energy on ``[i, j]`` that does not pair ``i``
    with ``j``; ``best[i][j]`` also allows it. A stack's interior uses
    ``open_`` so stacks stay maximal. Returns the structure and its energy.
    """
    check_sequence(seq)
    n = len(seq)
    scores = model.stack_scores
    unp = model.unpaired_penalty
    inf = math.inf

    def pair(a: int, b: int) -> str:
        return seq[a - 1] + seq[b - 1]

    best = [[0.0] * (n + 2) for _ in range(n + 2)]
    open_ = [[0.0] * (n + 2) for _ in range(n + 2)]
    helix = [[inf] * (n + 2) for _ in range(n + 2)]
    helix_size = [[0] * (n + 2) for _ in range(n + 2)]
    split = [[0] * (n + 2) for _ in range(n + 2)]

    def region(table, i: int, j: int) -> float:
        return table[i][j] if i <= j else 0.0

    for span in range(1, n + 1):
        for i in range(1, n - span + 2):
            j = i + span - 1
            # helix with outer arc (i, j)
            h, hs = inf, 0
            e, s = 0.0, 0
            while True:
                a, b = i + s, j - s
                if b - a < lam or pair(a, b) not in ALLOWED_PAIRS:
                    break
                if s > 0:
                    e += scores[(pair(a - 1, b + 1), pair(a, b))]
                s += 1
                if s >= sigma:
                    inside = region(open_, a + 1, b - 1)
                    if e + inside < h:
                        h, hs = e + inside, s
            helix[i][j], helix_size[i][j] = h, hs
            # i unpaired, or i closes a helix ending at k < j
            o, arg = unp + region(best, i + 1, j), 0
            for k in range(i + 1, j):
                if helix[i][k] < inf:
                    cand = helix[i][k] + region(best, k + 1, j)
                    if cand < o:
                        o, arg = cand, k
            open_[i][j], split[i][j] = o, arg
            best[i][j] = min(o, h)

    arcs: list[tuple[int, int]] = []

    def trace(i: int, j: int, allow_full: bool) -> None:
        while i <= j:
            if allow_full and helix[i][j] < open_[i][j]:
                s = helix_size[i][j]
                arcs.extend((i + t, j - t) for t in range(s))
                trace(i + s, j - s, False)
                return
            k = split[i][j]
            if k == 0:
                i += 1
            else:
                s = helix_size[i][k]
                arcs.extend((i + t, k - t) for t in range(s))
                trace(i + s, k - s, False)
                i = k + 1
            allow_full = True

    trace(1, n, True)
    structure = Structure(n, frozenset(arcs))
    return structure, (best[1][n] if n else 0.0)


class NussinovOracle:
    """Noncrossing baseline; returns only the mfe entry regardless of N."""

    def __init__(self, model: EnergyModel = DEFAULT_MODEL, sigma: int = DEFAULT_SIGMA, lam: int = DEFAULT_LAMBDA):
        self.model = model
        self.sigma = sigma
        self.lam = lam
        self._cache: dict[str, FoldRanking] = {}
        self.calls = 0

    def fold(self, seq: str, N: int = 1) -> FoldRanking:
        hit = self._cache.get(seq)
        if hit is None:
            self.calls += 1
            structure, e = nussinov_fold(seq, self.sigma, self.lam, self.model)
            hit = FoldRanking(seq, (RankedStructure(structure, round(e, 9)),))
            if len(self._cache) > 200_000:
                self._cache.clear()
            self._cache[seq] = hit
        return hit

    def mfe(self, seq: str) -> Structure:
        return self.fold(seq).mfe
