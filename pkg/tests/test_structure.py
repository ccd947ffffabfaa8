import random
from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bruteforce import ALLOWED, all_diagrams, max_crossing_clique
from pkinv.structure import (
    IllegalCharacter,
    IncompatibleSequence,
    InvalidTarget,
    LengthMismatch,
    Structure,
    StructureError,
    UnbalancedBracket,
    check_structure,
    compatible_distance,
    crossing_number,
    is_compatible,
    is_k_noncrossing,
    is_sigma_canonical,
    parse_structure,
    read_structures,
    serialize_structure,
    stacks,
    structure_distance,
)

HTYPE = "((([[[:::)))]]]"
HTYPE_ARCS = {(1, 12), (2, 11), (3, 10), (4, 15), (5, 14), (6, 13)}


def random_structure(rng, n, k=3, tries=None):
    """Random diagram on n positions with crossing number below k."""
    arcs = set()
    used = set()
    if n < 3:
        return Structure(n, frozenset())
    for _ in range(tries or n):
        i, j = sorted(rng.sample(range(1, n + 1), 2))
        if j - i < 2 or i in used or j in used:
            continue
        cand = Structure(n, frozenset(arcs | {(i, j)}))
        if crossing_number(cand) < k:
            arcs.add((i, j))
            used.update((i, j))
    return Structure(n, frozenset(arcs))


# ---------------------------------------------------------------- parsing


def test_parse_all_unpaired():
    s = parse_structure("::::")
    assert s.n == 4 and not s.arcs


def test_parse_htype():
    s = parse_structure(HTYPE)
    assert s.arcs == HTYPE_ARCS
    assert crossing_number(s) == 2


def test_parse_htype_matches_manual_matching():
    # independent matching: scan every family by hand
    text = HTYPE
    arcs = set()
    for o, c in ("()", "[]", "{}"):
        stack = []
        for pos, ch in enumerate(text, 1):
            if ch == o:
                stack.append(pos)
            elif ch == c:
                arcs.add((stack.pop(), pos))
    assert parse_structure(text).arcs == arcs


def test_unbalanced_reports_position():
    with pytest.raises(UnbalancedBracket) as exc:
        parse_structure("(((:::]]]")
    assert exc.value.position == 7
    with pytest.raises(UnbalancedBracket) as exc:
        parse_structure(":(((::::))")
    assert exc.value.position == 2


def test_illegal_character():
    with pytest.raises(IllegalCharacter) as exc:
        parse_structure("((::x::))")
    assert exc.value.position == 5 and exc.value.char == "x"


def test_dot_is_not_accepted():
    with pytest.raises(IllegalCharacter):
        parse_structure("(((...)))")


def test_adjacent_arc_rejected():
    with pytest.raises(StructureError):
        parse_structure("()")


def test_read_structures_skips_comments():
    lines = ["# header", "", "a ((((::::))))", "b ::::  # trailing"]
    got = list(read_structures(lines))
    assert [i for i, _ in got] == ["a", "b"]
    assert got[1][1].n == 4


# ---------------------------------------------------------------- serialize


def test_serialize_unpaired():
    assert serialize_structure(Structure.unpaired(4)) == "::::"


def test_serialize_htype_roundtrip():
    s = parse_structure(HTYPE)
    assert parse_structure(serialize_structure(s)) == s


def test_serialize_three_crossing_uses_three_families():
    s = Structure(11, frozenset({(1, 7), (4, 9), (5, 11)}))
    text = serialize_structure(s)
    assert {"(", "[", "{"} <= set(text)
    assert parse_structure(text) == s


def test_serialize_roundtrip_random():
    rng = random.Random(7)
    for _ in range(1000):
        s = random_structure(rng, rng.randint(1, 30))
        assert parse_structure(serialize_structure(s)) == s


# ---------------------------------------------------------------- crossing


def test_crossing_examples():
    assert crossing_number(Structure(11, frozenset({(1, 7), (4, 9), (5, 11)}))) == 3
    assert crossing_number(Structure.unpaired(5)) == 0
    assert crossing_number(parse_structure(HTYPE)) == 2


def test_crossing_matches_brute_force_small():
    for n in range(1, 11):
        for arcs in all_diagrams(n):
            s = Structure(n, frozenset(arcs))
            assert crossing_number(s) == max_crossing_clique(arcs)


def test_is_k_noncrossing():
    s = Structure(11, frozenset({(1, 7), (4, 9), (5, 11)}))
    assert not is_k_noncrossing(s, 3)
    assert is_k_noncrossing(s, 4)


# ---------------------------------------------------------------- stacks


def test_stacks_examples():
    assert [st.size for st in stacks(Structure(12, frozenset({(1, 12), (2, 11), (3, 10)})))] == [3]
    assert sorted(st.size for st in stacks(parse_structure(HTYPE))) == [3, 3]
    two = stacks(Structure(10, frozenset({(1, 10), (3, 8)})))
    assert sorted(st.size for st in two) == [1, 1]
    assert not is_sigma_canonical(Structure(10, frozenset({(1, 10), (3, 8)})), 3)


def test_stacks_partition_arcs():
    rng = random.Random(3)
    for _ in range(300):
        s = random_structure(rng, 24, tries=40)
        found = [a for st in stacks(s) for a in st.arcs]
        assert sorted(found) == sorted(s.arcs)
        for st in stacks(s):
            for (i, j), (k, l) in zip(st.arcs, st.arcs[1:]):
                assert (k, l) == (i + 1, j - 1)
            i, j = st.outer
            assert (i - 1, j + 1) not in s.arcs
            i, j = st.inner
            assert (i + 1, j - 1) not in s.arcs


def test_canonical_arcs_sit_in_large_stacks():
    rng = random.Random(5)
    for _ in range(200):
        s = random_structure(rng, 20, tries=60)
        if is_sigma_canonical(s, 2):
            assert all(st.size >= 2 for st in stacks(s))


# ---------------------------------------------------------------- validation


@pytest.mark.parametrize(
    "text",
    ["(((", "((((::))))", "((::::))", "((([[[{{{::::)))]]]}}}"],
)
def test_check_structure_rejects(text):
    with pytest.raises(InvalidTarget):
        check_structure(text)


def test_check_structure_accepts_canonical():
    s = check_structure("(((:[[[:::))):::]]]")
    assert s.n == 19


# ---------------------------------------------------------------- distance


def test_distance_identity_and_unpaired():
    s = parse_structure("((((::::))))")
    assert structure_distance(s, s) == 0
    assert structure_distance(Structure.unpaired(12), s) == 8


def test_distance_two_kinds_of_difference():
    s1 = Structure(20, frozenset({(4, 20), (10, 18)}))
    s2 = Structure(20, frozenset({(4, 17)}))
    contrib = {w for w in range(1, 21) if s1.partner[w] != s2.partner[w]}
    assert 4 in contrib and 18 in contrib


def test_distance_length_mismatch():
    with pytest.raises(LengthMismatch):
        structure_distance(Structure.unpaired(3), Structure.unpaired(4))


def test_distance_metric_exhaustive_small():
    for n in range(1, 8):
        structs = [Structure(n, frozenset(a)) for a in all_diagrams(n)]
        for x in structs:
            for y in structs:
                dxy = structure_distance(x, y)
                assert dxy == structure_distance(y, x)
                assert (dxy == 0) == (x == y)
                for z in structs:
                    assert structure_distance(x, z) <= dxy + structure_distance(y, z)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32), st.integers(8, 30))
def test_distance_triangle_random(seed, n):
    rng = random.Random(seed)
    x, y, z = (random_structure(rng, n) for _ in range(3))
    assert structure_distance(x, z) <= structure_distance(x, y) + structure_distance(y, z)


# ---------------------------------------------------------------- compatibility


def test_compatible_examples():
    assert is_compatible("ACGU", Structure.unpaired(4))
    s = Structure(12, frozenset({(1, 12)}))
    assert is_compatible("G" + "A" * 10 + "C", s)
    assert not is_compatible("A" + "A" * 10 + "G", s)


def test_compatible_matches_pair_check():
    rng = random.Random(11)
    s = parse_structure(HTYPE)
    for _ in range(500):
        seq = "".join(rng.choice("ACGU") for _ in range(15))
        assert is_compatible(seq, s) == all(seq[i - 1] + seq[j - 1] in ALLOWED for i, j in HTYPE_ARCS)


def test_compatible_monotone_under_arc_removal():
    rng = random.Random(13)
    for _ in range(300):
        s = random_structure(rng, 20)
        seq = "".join(rng.choice("ACGU") for _ in range(20))
        if is_compatible(seq, s):
            for arc in s.arcs:
                assert is_compatible(seq, Structure(20, s.arcs - {arc}))


def test_compatible_distance_examples():
    s = Structure(12, frozenset({(1, 12)}))
    a = "G" + "A" * 10 + "C"
    b = "C" + "A" * 10 + "G"
    assert compatible_distance(a, a, s) == 0
    assert compatible_distance(a, b, s) == 1
    with pytest.raises(IncompatibleSequence):
        compatible_distance(a, "A" * 12, s)


def _bfs_distance(src: str, dst: str, s: Structure) -> int:
    pairs = sorted(ALLOWED)
    seen = {src: 0}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        if cur == dst:
            return seen[cur]
        moves = []
        for w in range(1, s.n + 1):
            p = s.partner[w]
            if p == 0:
                moves += [cur[: w - 1] + b + cur[w:] for b in "ACGU" if b != cur[w - 1]]
            elif p > w:
                for pair in pairs:
                    if pair != cur[w - 1] + cur[p - 1]:
                        t = list(cur)
                        t[w - 1], t[p - 1] = pair
                        moves.append("".join(t))
        for m in moves:
            if m not in seen:
                seen[m] = seen[cur] + 1
                queue.append(m)
    raise AssertionError("unreachable")


def test_compatible_distance_equals_bfs():
    rng = random.Random(17)
    for n in range(3, 9):
        diagrams = list(all_diagrams(n))
        for arcs in rng.sample(diagrams, min(6, len(diagrams))):
            s = Structure(n, frozenset(arcs))
            for _ in range(3):
                a, b = [], []
                for seq in (a, b):
                    seq.extend(rng.choice("ACGU") for _ in range(n))
                    for i, j in arcs:
                        seq[i - 1], seq[j - 1] = rng.choice(sorted(ALLOWED))
                a, b = "".join(a), "".join(b)
                assert compatible_distance(a, b, s) == _bfs_distance(a, b, s)


def test_pair_table_is_involution():
    rng = random.Random(19)
    for _ in range(100):
        s = random_structure(rng, 25)
        table = s.pair_table()
        assert len(table) == s.n
        p = (0,) + table
        for w in range(1, s.n + 1):
            if p[w]:
                assert p[p[w]] == w and p[w] != w
