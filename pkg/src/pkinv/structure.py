"""Chord-diagram structures, dot-bracket I/O, crossings, stacks and distances.

Positions are 1-based throughout. An arc is a pair ``(i, j)`` with ``i < j``.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

Arc = tuple[int, int]

NUCLEOTIDES = "ACGU"
ALLOWED_PAIRS = frozenset({"AU", "UA", "GC", "CG", "GU", "UG"})
PAIR_LIST = ("AU", "UA", "GC", "CG", "GU", "UG")

UNPAIRED_CHAR = ":"
BRACKET_FAMILIES = (("(", ")"), ("[", "]"), ("{", "}"))
_OPENERS = {o: k for k, (o, _) in enumerate(BRACKET_FAMILIES)}
_CLOSERS = {c: k for k, (_, c) in enumerate(BRACKET_FAMILIES)}

DEFAULT_K = 3
DEFAULT_SIGMA = 3
DEFAULT_LAMBDA = 4


class StructureError(ValueError):
    pass


class UnbalancedBracket(StructureError):
    def __init__(self, position: int, char: str, message: str):
        self.position = position
        self.char = char
        super().__init__(f"{message} {char!r} at position {position}")


class IllegalCharacter(StructureError):
    def __init__(self, position: int, char: str):
        self.position = position
        self.char = char
        super().__init__(f"illegal character {char!r} at position {position}")


class NotRepresentable(StructureError):
    pass


class LengthMismatch(ValueError):
    pass


class IncompatibleSequence(ValueError):
    pass


class ArcNotInStructure(KeyError):
    pass


class InvalidTarget(ValueError):
    """Raised by target validation; ``reason`` holds the failed check."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class NotThreeNoncrossing(InvalidTarget):
    pass


def arcs_cross(a: Arc, b: Arc) -> bool:
    """True when the two arcs interleave (i1 < i2 < j1 < j2 in some order)."""
    (i1, j1), (i2, j2) = (a, b) if a[0] < b[0] else (b, a)
    return i1 < i2 < j1 < j2


def nested_in(inner: Arc, outer: Arc) -> bool:
    """The partial order ``inner ≺ outer``: i < i' < j' < j."""
    return outer[0] < inner[0] and inner[1] < outer[1]


@dataclass(frozen=True)
class Structure:
    n: int
    arcs: frozenset[Arc]

    def __post_init__(self) -> None:
        arcs = frozenset((int(i), int(j)) for i, j in self.arcs)
        object.__setattr__(self, "arcs", arcs)
        if self.n < 1:
            raise StructureError("structure must have at least one position")
        seen: set[int] = set()
        for i, j in arcs:
            if not 1 <= i < j <= self.n:
                raise StructureError(f"arc {(i, j)} outside 1..{self.n} or not ordered")
            if j == i + 1:
                raise StructureError(f"arc {(i, j)} joins adjacent positions")
            if i in seen or j in seen:
                raise StructureError(f"position of arc {(i, j)} already paired")
            seen.update((i, j))

    @classmethod
    def from_arcs(cls, n: int, arcs: Iterable[Arc]) -> "Structure":
        return cls(n, frozenset(arcs))

    @classmethod
    def unpaired(cls, n: int) -> "Structure":
        return cls(n, frozenset())

    @cached_property
    def sorted_arcs(self) -> tuple[Arc, ...]:
        return tuple(sorted(self.arcs))

    @cached_property
    def partner(self) -> tuple[int, ...]:
        """Pair table; ``partner[w]`` is the mate of ``w`` or 0. Index 0 is padding."""
        table = [0] * (self.n + 1)
        for i, j in self.arcs:
            table[i] = j
            table[j] = i
        return tuple(table)

    def pair_table(self) -> tuple[int, ...]:
        return self.partner[1:]

    def is_paired(self, w: int) -> bool:
        return self.partner[w] != 0

    @cached_property
    def unpaired_positions(self) -> tuple[int, ...]:
        return tuple(w for w in range(1, self.n + 1) if self.partner[w] == 0)

    def __len__(self) -> int:
        return self.n

    def __str__(self) -> str:
        return serialize_structure(self)

    def restrict(self, left: int, right: int) -> "Structure":
        """Arcs fully inside ``[left, right]``, relabelled to start at 1."""
        shift = left - 1
        return Structure(
            right - left + 1,
            frozenset((i - shift, j - shift) for i, j in self.arcs if left <= i and j <= right),
        )


# ---------------------------------------------------------------- dot-bracket


def parse_structure(text: str) -> Structure:
    text = text.strip()
    if not text:
        raise StructureError("empty structure string")
    stacks: list[list[int]] = [[] for _ in BRACKET_FAMILIES]
    arcs = []
    for pos, ch in enumerate(text, start=1):
        if ch == UNPAIRED_CHAR:
            continue
        if ch in _OPENERS:
            stacks[_OPENERS[ch]].append(pos)
        elif ch in _CLOSERS:
            family = stacks[_CLOSERS[ch]]
            if not family:
                raise UnbalancedBracket(pos, ch, "unmatched closing bracket")
            arcs.append((family.pop(), pos))
        else:
            raise IllegalCharacter(pos, ch)
    for k, family in enumerate(stacks):
        if family:
            raise UnbalancedBracket(family[-1], BRACKET_FAMILIES[k][0], "unmatched opening bracket")
    return Structure(len(text), frozenset(arcs))


def _page_assignment(arcs: tuple[Arc, ...], pages: int) -> list[int] | None:
    # first-fit by start point; backtracking only if first-fit overflows
    assignment: list[int] = []
    for a in arcs:
        for p in range(pages):
            if not any(q == p and arcs_cross(a, b) for b, q in zip(arcs, assignment)):
                assignment.append(p)
                break
        else:
            break
    if len(assignment) == len(arcs):
        return assignment

    conflicts = [[b for b in range(len(arcs)) if b != a and arcs_cross(arcs[a], arcs[b])] for a in range(len(arcs))]
    colour = [-1] * len(arcs)

    def place(idx: int) -> bool:
        if idx == len(arcs):
            return True
        for p in range(pages):
            if all(colour[b] != p for b in conflicts[idx]):
                colour[idx] = p
                if place(idx + 1):
                    return True
        colour[idx] = -1
        return False

    return colour if place(0) else None


def serialize_structure(structure: Structure) -> str:
    arcs = structure.sorted_arcs
    assignment = _page_assignment(arcs, len(BRACKET_FAMILIES))
    if assignment is None:
        raise NotRepresentable("arcs need more than three noncrossing bracket families")
    chars = [UNPAIRED_CHAR] * structure.n
    for (i, j), page in zip(arcs, assignment):
        chars[i - 1], chars[j - 1] = BRACKET_FAMILIES[page]
    return "".join(chars)


def read_structures(lines: Iterable[str]) -> Iterator[tuple[str, Structure]]:
    """Parse a one-structure-per-line fixture file.

    Blank lines and ``#`` comments are skipped. A line may carry an
    identifier before the structure, separated by whitespace.
    """
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        ident, text = (fields[0], fields[-1]) if len(fields) > 1 else (None, fields[0])
        structure = parse_structure(text)
        yield (ident or text), structure


# ---------------------------------------------------------------- crossings


def crossing_number(structure: Structure) -> int:
    """Largest number of mutually crossing arcs.

    Mutually crossing arcs all span a common cut point, and among arcs
    spanning a cut they are exactly the chains increasing in both ends, so
    the answer is a longest increasing subsequence per cut.
    """
    arcs = structure.sorted_arcs
    best = 0
    for cut in range(1, structure.n):
        tails: list[int] = []
        for i, j in arcs:
            if i <= cut < j:
                k = bisect_left(tails, j)
                if k == len(tails):
                    tails.append(j)
                else:
                    tails[k] = j
        best = max(best, len(tails))
    return best


def is_k_noncrossing(structure: Structure, k: int = DEFAULT_K) -> bool:
    return crossing_number(structure) <= k - 1


def crossing_pairs(structure: Structure) -> list[tuple[Arc, Arc]]:
    arcs = structure.sorted_arcs
    out = []
    for x, a in enumerate(arcs):
        for b in arcs[x + 1:]:
            if b[0] > a[1]:
                break
            if a[0] < b[0] < a[1] < b[1]:
                out.append((a, b))
    return out


# ---------------------------------------------------------------- stacks


@dataclass(frozen=True)
class Stack:
    arcs: tuple[Arc, ...]

    @property
    def size(self) -> int:
        return len(self.arcs)

    @property
    def outer(self) -> Arc:
        return self.arcs[0]

    @property
    def inner(self) -> Arc:
        return self.arcs[-1]


def stacks(structure: Structure) -> list[Stack]:
    arcs = structure.arcs
    out = []
    for i, j in structure.sorted_arcs:
        if (i - 1, j + 1) in arcs:
            continue
        run = [(i, j)]
        while (run[-1][0] + 1, run[-1][1] - 1) in arcs:
            run.append((run[-1][0] + 1, run[-1][1] - 1))
        out.append(Stack(tuple(run)))
    return out


def stack_of(structure: Structure) -> dict[Arc, Stack]:
    return {a: st for st in stacks(structure) for a in st.arcs}


def min_stack_size(structure: Structure) -> int:
    sizes = [st.size for st in stacks(structure)]
    return min(sizes) if sizes else 0


def is_sigma_canonical(structure: Structure, sigma: int = DEFAULT_SIGMA) -> bool:
    return all(st.size >= sigma for st in stacks(structure))


def min_arc_length(structure: Structure) -> int | None:
    return min((j - i for i, j in structure.arcs), default=None)


def validate_target(
    structure: Structure,
    k: int = DEFAULT_K,
    sigma: int = DEFAULT_SIGMA,
    lam: int = DEFAULT_LAMBDA,
) -> Structure:
    """Check a design target; raise :class:`InvalidTarget` naming the failed rule."""
    cn = crossing_number(structure)
    if cn > k - 1:
        raise NotThreeNoncrossing(f"structure has {cn} mutually crossing arcs; at most {k - 1} allowed")
    shortest = min_arc_length(structure)
    if shortest is not None and shortest < lam:
        raise InvalidTarget(f"arc of length {shortest} is shorter than the minimum {lam}")
    for st in stacks(structure):
        if st.size < sigma:
            raise InvalidTarget(f"stack at {st.outer} has size {st.size}, below the minimum {sigma}")
    return structure


def check_structure(
    text: str,
    k: int = DEFAULT_K,
    sigma: int = DEFAULT_SIGMA,
    lam: int = DEFAULT_LAMBDA,
) -> Structure:
    """Parse and validate a target string; every failure becomes InvalidTarget."""
    try:
        structure = parse_structure(text)
    except StructureError as exc:
        raise InvalidTarget(str(exc)) from exc
    return validate_target(structure, k, sigma, lam)


# ---------------------------------------------------------------- distances


def structure_distance(s1: Structure, s2: Structure) -> int:
    if s1.n != s2.n:
        raise LengthMismatch(f"structures have lengths {s1.n} and {s2.n}")
    p1, p2 = s1.partner, s2.partner
    return sum(1 for w in range(1, s1.n + 1) if p1[w] != p2[w])


def check_sequence(seq: str, n: int | None = None) -> str:
    bad = set(seq) - set(NUCLEOTIDES)
    if bad:
        raise ValueError(f"sequence contains symbols outside ACGU: {''.join(sorted(bad))}")
    if n is not None and len(seq) != n:
        raise LengthMismatch(f"sequence length {len(seq)} does not match structure length {n}")
    return seq


def can_pair(x: str, y: str) -> bool:
    return x + y in ALLOWED_PAIRS


def is_compatible(seq: str, structure: Structure) -> bool:
    if len(seq) != structure.n:
        raise LengthMismatch(f"sequence length {len(seq)} does not match structure length {structure.n}")
    return all(seq[i - 1] + seq[j - 1] in ALLOWED_PAIRS for i, j in structure.arcs)


def compatible_distance(s1: str, s2: str, structure: Structure) -> int:
    """Hamming distance in the product of unpaired and base-pair cubes."""
    for s in (s1, s2):
        if not is_compatible(s, structure):
            raise IncompatibleSequence(f"{s} is not compatible with the structure")
    partner = structure.partner
    moves = 0
    for w in range(1, structure.n + 1):
        v = partner[w]
        if v == 0:
            moves += s1[w - 1] != s2[w - 1]
        elif w < v:
            moves += (s1[w - 1], s1[v - 1]) != (s2[w - 1], s2[v - 1])
    return moves
