"""Uniform sampling of solved grids and puzzle carving.

Solved grids are indexed by an arbitrary-precision rank. For n=2 the census
is a full enumeration in lexicographic order of the single-line text form;
for n=3 it is a table of band-1 equivalence classes with completion counts
(see trialbench.census3), and ranks follow the census order: class, then
class member, then completion.

Sampling modes:

* Exact — draw a uniform rank and unrank it; exactly uniform over all solved
  grids. Cheap for n=2; for n=3 it needs a census table and costs a few
  seconds per board.
* Fast — randomized DFS fill with shuffled cell and value order. Full
  support over solved grids but only approximately uniform (early cells are
  filled under fewer constraints, which skews the distribution); this is the
  default for bulk training data.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernels as K
from .board import Board, BoardError
from .rng import make_rng, randbelow_bigint

N2_TOTAL = 288


class SamplerMode(enum.Enum):
    EXACT = "exact"
    FAST = "fast"


@dataclass(frozen=True)
class CensusClass:
    """One band-1 equivalence class: representative band (27 digits, rows
    1-3 row-major), number of solved grids whose band-1 lies in the class
    (class size times the 9! box-1 relabelings), and completions per member."""

    rep: tuple
    multiplicity: int
    count: int


@dataclass
class Census:
    n: int
    total: int
    boards: Optional[list] = None       # n=2: all solved grids, lex order
    classes: Optional[list] = None      # n=3: CensusClass records
    complete: bool = True

    def __post_init__(self):
        if self.n == 3 and self.classes is not None:
            acc = sum(c.multiplicity * c.count for c in self.classes)
            if self.complete and acc != self.total:
                raise ValueError(f"census inconsistent: sum {acc} != total {self.total}")


def _enumerate_n2() -> list:
    """All solved 4×4 grids by DFS in row-major cell order, digits ascending,
    which is exactly lexicographic order of the single-line form."""
    grids = []
    cells = [0] * 16

    def ok(i, v):
        r, c = divmod(i, 4)
        for j in range(16):
            if cells[j] == v and j != i:
                jr, jc = divmod(j, 4)
                if jr == r or jc == c or (jr // 2 == r // 2 and jc // 2 == c // 2):
                    return False
        return True

    def rec(i):
        if i == 16:
            grids.append(tuple(cells))
            return
        for v in range(1, 5):
            if ok(i, v):
                cells[i] = v
                rec(i + 1)
                cells[i] = 0

    rec(0)
    return grids


_N2_CACHE: Optional[Census] = None


def census_n2() -> Census:
    """Full enumeration census of solved 4×4 grids (288 of them)."""
    global _N2_CACHE
    if _N2_CACHE is None:
        boards = _enumerate_n2()
        assert len(boards) == len(set(boards)) == N2_TOTAL
        _N2_CACHE = Census(n=2, total=len(boards), boards=boards)
    return _N2_CACHE


def rank(board: Board, census: Census) -> int:
    """Index of a solved board under the census order."""
    if not board.is_solved():
        raise BoardError("rank requires a solved, valid board")
    if board.n != census.n:
        raise BoardError("board and census block orders differ")
    if census.n == 2:
        try:
            return census.boards.index(board.cells)
        except ValueError:
            raise BoardError("board not present in census") from None
    from .census3 import rank3
    return rank3(board, census)


def unrank(k: int, census: Census) -> Board:
    """Solved board with census-order index k."""
    if not 0 <= k < census.total:
        raise BoardError(f"rank {k} out of range [0, {census.total})")
    if census.n == 2:
        return Board(2, census.boards[k])
    from .census3 import unrank3
    return unrank3(k, census)


def _fill_random(n: int, rng: np.random.Generator) -> Board:
    """Randomized DFS fill.

    Cells are chosen by minimum remaining candidates with a random priority
    for tie-breaks, and values are tried in a fresh random order at each
    depth. MRV keeps backtracking negligible (a static random cell order can
    blow up exponentially); the tie-break and value randomness still reach
    every solved grid.
    """
    t = K.tables(n)
    m, nc = t.m, t.ncells
    priority = rng.permutation(nc).astype(np.int32)
    value_orders = np.empty((nc, m), np.int8)
    for d in range(nc):
        value_orders[d] = rng.permutation(m) + 1
    cells = K.fill_random_kernel(t.m, t.full_mask, t.rows, t.cols, t.boxes,
                                 t.popcount, t.lowbit_index, priority, value_orders)
    return Board.from_array(n, cells)


def sample_solved(n: int, seed: int, mode: SamplerMode = SamplerMode.FAST,
                  census: Optional[Census] = None, stream: int = 0) -> Board:
    """One solved grid; Exact mode is uniform over all solved grids."""
    rng = make_rng(seed, stream, 0)
    if mode == SamplerMode.EXACT:
        if n == 2:
            census = census or census_n2()
        elif census is None:
            raise BoardError("exact n=3 sampling needs a census table")
        k = randbelow_bigint(rng, census.total)
        return unrank(k, census)
    return _fill_random(n, rng)


@dataclass(frozen=True)
class PuzzlePair:
    puzzle: Board
    solution: Board
    seed: int
    givens: int


def carve(solution: Board, seed: int, stream: int = 0) -> PuzzlePair:
    """Remove entries in a uniformly random cell order, skipping any removal
    that would leave more than one solution."""
    if not solution.is_solved():
        raise BoardError("carve requires a solved board")
    rng = make_rng(seed, stream, 1)
    t = K.tables(solution.n)
    order = rng.permutation(t.ncells).astype(np.int64)
    puzzle = K.carve_kernel(solution.to_array(), order, t.m, t.full_mask, t.rows,
                            t.cols, t.boxes, t.popcount, t.lowbit_index)
    pb = Board.from_array(solution.n, puzzle)
    return PuzzlePair(pb, solution, seed, pb.filled_count())


def generate(n: int, count: int, seed: int, mode: SamplerMode = SamplerMode.FAST,
             census: Optional[Census] = None) -> Iterator[PuzzlePair]:
    """Stream of carved puzzle/solution pairs, reproducible from the seed.

    Instance i uses streams derived from (seed, i), so the stream content
    does not depend on how much of it is consumed.
    """
    for i in range(count):
        solution = sample_solved(n, seed, mode, census, stream=i)
        pair = carve(solution, seed, stream=i)
        yield pair
