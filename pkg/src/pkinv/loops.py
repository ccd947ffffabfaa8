"""Loop decomposition of 3-noncrossing structures and the DECOMPOSE interval plan.

Every arc is owned by exactly one loop. An arc that is a minimal
beta-crossing for some arc beta belongs to a pseudoknot loop; pseudoknot
loops are the crossing-connected components of those arcs. Any other arc
closes a hairpin, interior or multi-loop made of the positions directly
beneath it. Stacked arcs close degenerate interior loops with empty gaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .structure import (
    Arc,
    ArcNotInStructure,
    NotThreeNoncrossing,
    Structure,
    arcs_cross,
    crossing_number,
    crossing_pairs,
    nested_in,
    stack_of,
    stacks,
)


class LoopKind(str, Enum):
    HAIRPIN = "hairpin"
    INTERIOR = "interior"
    MULTI = "multi"
    PSEUDOKNOT = "pseudoknot"


@dataclass(frozen=True)
class Loop:
    """One loop.

    ``arcs`` is the defining arc set: the closing arc followed by the outer
    arcs of the enclosed substructures, or the set P for a pseudoknot.
    ``owned`` are the arcs assigned to this loop by the decomposition.
    """

    kind: LoopKind
    arcs: tuple[Arc, ...]
    unpaired: tuple[int, ...]
    owned: tuple[Arc, ...]

    @property
    def span(self) -> tuple[int, int]:
        points = [p for a in self.arcs for p in a] + list(self.unpaired)
        return min(points), max(points)

    @property
    def is_degenerate(self) -> bool:
        """An interior loop between two stacked arcs."""
        if self.kind is not LoopKind.INTERIOR or self.unpaired:
            return False
        (i, j), (k, l) = self.arcs
        return k == i + 1 and l == j - 1

    def dump(self) -> str:
        arcs = " ".join(f"{i}-{j}" for i, j in self.arcs)
        unp = " ".join(str(x) for x in self.unpaired) or "-"
        return f"{self.kind.value}\t{arcs}\t{unp}"


@dataclass(frozen=True)
class LoopDecomposition:
    structure: Structure
    loops: tuple[Loop, ...]
    exterior: tuple[int, ...]
    arc_loop: dict[Arc, int] = field(compare=False)
    position_loop: dict[int, int] = field(compare=False)

    def loops_of_kind(self, kind: LoopKind) -> list[Loop]:
        return [lp for lp in self.loops if lp.kind is kind]

    def dump(self) -> str:
        lines = [lp.dump() for lp in self.loops]
        lines.append("exterior\t-\t" + (" ".join(map(str, self.exterior)) or "-"))
        return "\n".join(lines)


def crossing_sets(structure: Structure) -> dict[Arc, set[Arc]]:
    """A_S(alpha) for every arc alpha."""
    out: dict[Arc, set[Arc]] = {a: set() for a in structure.arcs}
    for a, b in crossing_pairs(structure):
        out[a].add(b)
        out[b].add(a)
    return out


def _minimal(arcs: Iterable[Arc]) -> set[Arc]:
    pool = list(arcs)
    return {a for a in pool if not any(nested_in(b, a) for b in pool)}


def minimal_beta_crossing(structure: Structure, beta: Arc) -> set[Arc]:
    """The ≺-minimal arcs among those crossing ``beta``."""
    if beta not in structure.arcs:
        raise ArcNotInStructure(beta)
    return _minimal(a for a in structure.arcs if arcs_cross(a, beta))


def minimal_crossing_arcs(structure: Structure) -> set[Arc]:
    """Arcs that are minimal beta-crossing for at least one beta."""
    out: set[Arc] = set()
    for crossers in crossing_sets(structure).values():
        out |= _minimal(crossers)
    return out


def _components(vertices: Iterable[Arc], adjacent) -> list[list[Arc]]:
    todo = sorted(vertices)
    seen: set[Arc] = set()
    comps = []
    for start in todo:
        if start in seen:
            continue
        comp, frontier = [], [start]
        seen.add(start)
        while frontier:
            a = frontier.pop()
            comp.append(a)
            for b in todo:
                if b not in seen and adjacent(a, b):
                    seen.add(b)
                    frontier.append(b)
        comps.append(sorted(comp))
    return comps


def _blocks(branches: list[Arc]) -> list[list[Arc]]:
    """Group sibling arcs into substructures: overlapping spans chain together."""
    groups: list[list[Arc]] = []
    reach = 0
    for a in sorted(branches):
        if groups and a[0] < reach:
            groups[-1].append(a)
            reach = max(reach, a[1])
        else:
            groups.append([a])
            reach = a[1]
    return groups


def decompose_loops(structure: Structure) -> LoopDecomposition:
    if crossing_number(structure) > 2:
        raise NotThreeNoncrossing("loop decomposition requires a 3-noncrossing structure")
    arcs = structure.sorted_arcs
    in_pk = minimal_crossing_arcs(structure)
    pk_components = _components(in_pk, arcs_cross)

    loops: list[Loop] = []
    arc_loop: dict[Arc, int] = {}
    position_loop: dict[int, int] = {}
    pk_index: dict[Arc, int] = {}

    # innermost enclosing arcs of each unpaired position
    enclosing: dict[int, list[Arc]] = {}
    exterior = []
    for x in structure.unpaired_positions:
        around = [a for a in arcs if a[0] < x < a[1]]
        if around:
            enclosing[x] = sorted(_minimal(around))
        else:
            exterior.append(x)

    pk_unpaired: dict[int, list[int]] = {c: [] for c in range(len(pk_components))}
    closed_unpaired: dict[Arc, list[int]] = {a: [] for a in arcs if a not in in_pk}
    for c, comp in enumerate(pk_components):
        for a in comp:
            pk_index[a] = c
    spans = [(comp[0][0], max(j for _, j in comp)) for comp in pk_components]
    for x, inner in enclosing.items():
        if len(inner) == 1 and inner[0] not in in_pk:
            closed_unpaired[inner[0]].append(x)
            continue
        owners = {pk_index[a] for a in inner if a in in_pk}
        if not owners:
            owners = {c for c, (lo, hi) in enumerate(spans) if lo < x < hi}
        if not owners:
            # crossing enclosing arcs, none of them minimal: shortest arc takes it
            closer = min(inner, key=lambda a: (a[1] - a[0], a))
            closed_unpaired[closer].append(x)
            continue
        c = min(owners, key=lambda c: (spans[c][1] - spans[c][0], c))
        pk_unpaired[c].append(x)

    order: list[tuple[Arc, object]] = [(a, None) for a in arcs if a not in in_pk]
    order += [(comp[0], c) for c, comp in enumerate(pk_components)]
    order.sort(key=lambda item: item[0])

    for first, comp_id in order:
        idx = len(loops)
        if comp_id is not None:
            comp = pk_components[comp_id]
            loop = Loop(LoopKind.PSEUDOKNOT, tuple(comp), tuple(pk_unpaired[comp_id]), tuple(comp))
            for a in comp:
                arc_loop[a] = idx
        else:
            closing = first
            beneath = [b for b in arcs if nested_in(b, closing)]
            branches = sorted(b for b in beneath if not any(nested_in(b, c) for c in beneath))
            groups = _blocks(branches)
            if not groups:
                kind = LoopKind.HAIRPIN
            elif len(groups) == 1 and len(groups[0]) == 1:
                kind = LoopKind.INTERIOR
            else:
                kind = LoopKind.MULTI
            loop = Loop(kind, (closing, *branches), tuple(closed_unpaired[closing]), (closing,))
            arc_loop[closing] = idx
        for x in loop.unpaired:
            position_loop[x] = idx
        loops.append(loop)

    return LoopDecomposition(structure, tuple(loops), tuple(exterior), arc_loop, position_loop)


def check_pseudoknot_minimality(structure: Structure, decomposition: LoopDecomposition) -> bool:
    """Every arc of every pseudoknot loop is minimal beta-crossing for some beta."""
    crossers = crossing_sets(structure)
    for loop in decomposition.loops_of_kind(LoopKind.PSEUDOKNOT):
        for a in loop.arcs:
            if not any(a in _minimal(c) for c in crossers.values()):
                return False
    return True


# ---------------------------------------------------------------- core, L-graph


@dataclass(frozen=True)
class CoreAndLGraph:
    core: Structure
    vertices: tuple[Arc, ...]
    edges: frozenset[tuple[Arc, Arc]]

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        adj = {v: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        seen, frontier = {self.vertices[0]}, [self.vertices[0]]
        while frontier:
            for b in adj[frontier.pop()]:
                if b not in seen:
                    seen.add(b)
                    frontier.append(b)
        return len(seen) == len(self.vertices)


def core(structure: Structure) -> Structure:
    """Collapse every stack to its outer arc and drop the vacated positions."""
    dropped = set()
    for st in stacks(structure):
        for i, j in st.arcs[1:]:
            dropped.update((i, j))
    keep = [w for w in range(1, structure.n + 1) if w not in dropped]
    relabel = {w: k for k, w in enumerate(keep, start=1)}
    kept_arcs = {st.outer for st in stacks(structure)}
    return Structure(len(keep), frozenset((relabel[i], relabel[j]) for i, j in kept_arcs))


def l_graph(structure: Structure) -> CoreAndLGraph:
    return CoreAndLGraph(core(structure), structure.sorted_arcs, frozenset(crossing_pairs(structure)))


def is_skeleton(structure: Structure) -> bool:
    c = core(structure)
    graph = l_graph(c)
    touched = {a for e in graph.edges for a in e}
    return bool(c.arcs) and touched == set(c.arcs) and graph.is_connected()


def is_planar(structure: Structure) -> bool:
    """Bi-secondary test: can the arcs be split over two noncrossing pages?"""
    colour: dict[Arc, int] = {}
    adj: dict[Arc, list[Arc]] = {a: [] for a in structure.arcs}
    for a, b in crossing_pairs(structure):
        adj[a].append(b)
        adj[b].append(a)
    for start in structure.sorted_arcs:
        if start in colour:
            continue
        colour[start] = 0
        frontier = [start]
        while frontier:
            a = frontier.pop()
            for b in adj[a]:
                if b not in colour:
                    colour[b] = 1 - colour[a]
                    frontier.append(b)
                elif colour[b] == colour[a]:
                    return False
    return True


# ---------------------------------------------------------------- DECOMPOSE


@dataclass(frozen=True)
class LoopIntervals:
    loop: Loop
    a: tuple[int, int]
    b: tuple[int, int]
    c: tuple[int, int]


@dataclass(frozen=True)
class IntervalPlan:
    """Ordered intervals for the local search, plus where each came from."""

    n: int
    intervals: tuple[tuple[int, int], ...]
    provenance: tuple[str, ...]
    per_loop: tuple[LoopIntervals, ...]

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)


def design_loops(decomposition: LoopDecomposition) -> list[Loop]:
    """Loops that carry their own interval; stacked pairs ride with their stem."""
    return [lp for lp in decomposition.loops if not lp.is_degenerate]


def _stem_span(loop: Loop, stem: dict[Arc, object]) -> tuple[int, int]:
    lo, hi = loop.span
    for a in loop.owned:
        outer = stem[a].outer
        lo, hi = min(lo, outer[0]), max(hi, outer[1])
    return lo, hi


def decompose_intervals(structure: Structure) -> IntervalPlan:
    decomposition = decompose_loops(structure)
    stem = stack_of(structure)
    partner = structure.partner
    n = structure.n

    spans = [(lp, _stem_span(lp, stem)) for lp in design_loops(decomposition)]
    # nested loops first, otherwise by start point
    spans.sort(key=lambda item: (item[1][1], -item[1][0]))
    assert len({s for _, s in spans}) == len(spans), "two loops share a span"

    per_loop = []
    intervals: list[tuple[int, int]] = []
    provenance: list[str] = []
    hull: tuple[int, int] | None = None
    for w, (loop, a) in enumerate(spans, start=1):
        lo, hi = a
        while lo > 1 and partner[lo - 1] == 0:
            lo -= 1
        while hi < n and partner[hi + 1] == 0:
            hi += 1
        b = (lo, hi)
        hull = b if hull is None else (min(hull[0], lo), max(hull[1], hi))
        per_loop.append(LoopIntervals(loop, a, b, hull))
        for tag, iv in ((f"a{w}", a), (f"b{w}", b), (f"c{w}", hull)):
            if intervals and intervals[-1] == iv:
                continue
            intervals.append(iv)
            provenance.append(tag)

    if not intervals or intervals[-1] != (1, n):
        intervals.append((1, n))
        provenance.append("whole")
    return IntervalPlan(n, tuple(intervals), tuple(provenance), tuple(per_loop))
