"""Inverse folding of 3-noncrossing canonical RNA pseudoknot structures."""

from .loops import IntervalPlan, Loop, LoopDecomposition, LoopKind, decompose_intervals, decompose_loops
from .oracle import EnergyModel, ExhaustiveOracle, FoldRanking, NussinovOracle, enumerate_structures, energy, fold
from .search import Failure, SearchParams, Success, adjust_seq, inv, local_search, make_start
from .structure import (
    InvalidTarget,
    Structure,
    check_structure,
    crossing_number,
    is_compatible,
    parse_structure,
    serialize_structure,
    structure_distance,
)

__version__ = "0.1.0"
