"""Generalized n²×n² Sudoku boards, the four basic inference rules, conflict
detection, and a uniqueness-counting solver.

Boards are immutable value objects; every operation returns fresh values, so
instances are safe to share across workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K


class BoardError(ValueError):
    pass


class NoSolutionError(BoardError):
    pass


class MultipleSolutionsError(BoardError):
    pass


class Move(NamedTuple):
    """One placement: row, column, value, all 1-based and in 1..m."""

    r: int
    c: int
    v: int


class RuleKind(enum.IntEnum):
    NAKED_SINGLE = 0
    HIDDEN_ROW = 1
    HIDDEN_COL = 2
    HIDDEN_BOX = 3


class ConflictKind(enum.IntEnum):
    DUPLICATE_IN_UNIT = 1
    EMPTY_CELL_NO_CANDIDATE = 2
    DIGIT_NO_PLACE_IN_UNIT = 3


@dataclass(frozen=True)
class Conflict:
    kind: ConflictKind
    # DUPLICATE_IN_UNIT / EMPTY_CELL_NO_CANDIDATE: cell = flat cell index.
    # DIGIT_NO_PLACE_IN_UNIT: unit = 0..m-1 rows, m..2m-1 cols, 2m..3m-1 boxes.
    cell: int = -1
    unit: int = -1
    digit: int = 0


@dataclass(frozen=True)
class CandidateGrid:
    """Per-cell candidate bitmask over digits 1..m (bit d-1 = digit d)."""

    n: int
    masks: tuple

    def candidates_of(self, r: int, c: int) -> frozenset:
        m = self.n * self.n
        mask = self.masks[(r - 1) * m + (c - 1)]
        return frozenset(d + 1 for d in range(m) if mask >> d & 1)


@dataclass(frozen=True)
class Board:
    """n²×n² grid; ``cells`` is row-major, 0 = empty, 1..m = digit."""

    n: int
    cells: tuple

    def __post_init__(self):
        m = self.n * self.n
        if self.n not in (2, 3):
            raise BoardError(f"block order must be 2 or 3, got {self.n}")
        if len(self.cells) != m * m:
            raise BoardError(f"expected {m * m} cells, got {len(self.cells)}")
        for v in self.cells:
            if not 0 <= v <= m:
                raise BoardError(f"cell value {v} out of range 0..{m}")

    @property
    def m(self) -> int:
        return self.n * self.n

    @classmethod
    def empty(cls, n: int) -> "Board":
        return cls(n, (0,) * (n * n * n * n))

    @classmethod
    def from_array(cls, n: int, arr) -> "Board":
        return cls(n, tuple(int(v) for v in arr))

    def to_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int8)

    def get(self, r: int, c: int) -> int:
        return self.cells[(r - 1) * self.m + (c - 1)]

    def place(self, move: Move) -> "Board":
        m = self.m
        if not (1 <= move.r <= m and 1 <= move.c <= m and 1 <= move.v <= m):
            raise BoardError(f"move {move} out of range for m={m}")
        i = (move.r - 1) * m + (move.c - 1)
        cells = list(self.cells)
        cells[i] = move.v
        return Board(self.n, tuple(cells))

    def clear(self, r: int, c: int) -> "Board":
        i = (r - 1) * self.m + (c - 1)
        cells = list(self.cells)
        cells[i] = 0
        return Board(self.n, tuple(cells))

    def filled_count(self) -> int:
        return sum(1 for v in self.cells if v)

    def is_full(self) -> bool:
        return all(v != 0 for v in self.cells)

    def is_valid(self) -> bool:
        """No duplicate nonzero digit in any row, column, or box."""
        t = K.tables(self.n)
        _, _, _, dup = K._used_masks(self.to_array(), t.m, t.rows, t.cols, t.boxes)
        return dup < 0

    def is_solved(self) -> bool:
        return self.is_full() and self.is_valid()

    # -- text forms ---------------------------------------------------------

    def to_single_line(self) -> str:
        return "".join(str(v) for v in self.cells)

    @classmethod
    def from_single_line(cls, text: str, n: Optional[int] = None) -> "Board":
        text = text.strip()
        if n is None:
            if len(text) == 81:
                n = 3
            elif len(text) == 16:
                n = 2
            else:
                raise BoardError(f"single-line form must be 16 or 81 chars, got {len(text)}")
        if not text.isdigit():
            raise BoardError("single-line form must be digit characters")
        return cls(n, tuple(int(ch) for ch in text))

    def to_grid(self) -> str:
        m = self.m
        return "\n".join(
            "".join(str(v) for v in self.cells[r * m:(r + 1) * m]) for r in range(m)
        )

    @classmethod
    def from_grid(cls, text: str, n: Optional[int] = None) -> "Board":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        return cls.from_single_line("".join(lines), n)

    def to_triplets(self) -> str:
        """All cells as 3-digit rcv numbers, value 0 marking empties."""
        m = self.m
        out = []
        for r in range(1, m + 1):
            for c in range(1, m + 1):
                out.append(f"{r}{c}{self.get(r, c)}")
        return " ".join(out)

    @classmethod
    def from_triplets(cls, text: str, n: int = 3) -> "Board":
        m = n * n
        cells = [0] * (m * m)
        for tok in text.split():
            if len(tok) != 3 or not tok.isdigit():
                raise BoardError(f"bad triplet {tok!r}")
            r, c, v = int(tok[0]), int(tok[1]), int(tok[2])
            if not (1 <= r <= m and 1 <= c <= m and 0 <= v <= m):
                raise BoardError(f"triplet {tok!r} out of range for m={m}")
            cells[(r - 1) * m + (c - 1)] = v
        return cls(n, tuple(cells))


def candidates(board: Board) -> CandidateGrid:
    """Candidate mask per cell: digits absent from the cell's row, column,
    and box; the singleton of the digit for filled cells."""
    t = K.tables(board.n)
    masks = K.candidates_kernel(board.to_array(), t.m, t.full_mask, t.rows, t.cols, t.boxes)
    return CandidateGrid(board.n, tuple(int(x) for x in masks))


def forced_moves(board: Board) -> set:
    """Every (Move, RuleKind) justified by one of the four basic rules."""
    t = K.tables(board.n)
    raw = K.forced_moves_kernel(board.to_array(), t.m, t.full_mask, t.rows, t.cols,
                                t.boxes, t.unit_cells)
    m = t.m
    out = set()
    for i, v, rule in raw:
        out.add((Move(int(i) // m + 1, int(i) % m + 1, int(v)), RuleKind(int(rule))))
    return out


def forced_move_set(board: Board) -> set:
    """Just the moves of forced_moves, deduplicated across rules."""
    return {mv for mv, _ in forced_moves(board)}


def detect_conflict(board: Board) -> Optional[Conflict]:
    t = K.tables(board.n)
    code, a, b = K.detect_conflict_kernel(board.to_array(), t.m, t.full_mask, t.rows,
                                          t.cols, t.boxes, t.unit_cells, t.popcount)
    if code == K.CONFLICT_NONE:
        return None
    if code == K.CONFLICT_DUPLICATE:
        return Conflict(ConflictKind.DUPLICATE_IN_UNIT, cell=int(a))
    if code == K.CONFLICT_EMPTY_CELL:
        return Conflict(ConflictKind.EMPTY_CELL_NO_CANDIDATE, cell=int(a))
    return Conflict(ConflictKind.DIGIT_NO_PLACE_IN_UNIT, unit=int(a), digit=int(b))


class PropagateResult(NamedTuple):
    board: Board
    trace: list
    conflict: Optional[Conflict]


def propagate(board: Board) -> PropagateResult:
    """Apply forced moves until none remain or a conflict appears.

    The returned trace lists moves in application order; the fixpoint is
    independent of that order on conflict-free boards.
    """
    t = K.tables(board.n)
    cells = board.to_array()
    trace_raw, code, a, b = K.propagate_kernel(cells, t.m, t.full_mask, t.rows, t.cols,
                                               t.boxes, t.unit_cells, t.popcount)
    m = t.m
    trace = [Move(int(i) // m + 1, int(i) % m + 1, int(v)) for i, v in trace_raw]
    out = Board.from_array(board.n, cells)
    if code == K.CONFLICT_NONE:
        conflict = None
    elif code == K.CONFLICT_DUPLICATE:
        conflict = Conflict(ConflictKind.DUPLICATE_IN_UNIT, cell=int(a))
    elif code == K.CONFLICT_EMPTY_CELL:
        conflict = Conflict(ConflictKind.EMPTY_CELL_NO_CANDIDATE, cell=int(a))
    else:
        conflict = Conflict(ConflictKind.DIGIT_NO_PLACE_IN_UNIT, unit=int(a), digit=int(b))
    return PropagateResult(out, trace, conflict)


def count_solutions(board: Board, limit: int = 2) -> int:
    """Number of completions of the board, truncated at ``limit``."""
    if limit < 0:
        raise BoardError("limit must be non-negative")
    t = K.tables(board.n)
    sol = np.empty((2, t.ncells), np.int8)
    return int(K.count_solutions_kernel(board.to_array(), t.m, t.full_mask, t.rows,
                                        t.cols, t.boxes, t.popcount, t.lowbit_index,
                                        limit, sol))


def solve_unique(board: Board) -> Board:
    """The unique completion; raises if there are zero or several."""
    t = K.tables(board.n)
    sol = np.empty((2, t.ncells), np.int8)
    cnt = int(K.count_solutions_kernel(board.to_array(), t.m, t.full_mask, t.rows,
                                       t.cols, t.boxes, t.popcount, t.lowbit_index,
                                       2, sol))
    if cnt == 0:
        raise NoSolutionError("board has no completion")
    if cnt > 1:
        raise MultipleSolutionsError("board has more than one completion")
    return Board.from_array(board.n, sol[0])


def rules_complete(board: Board) -> bool:
    """True if forced moves alone finish the board without conflict."""
    t = K.tables(board.n)
    return bool(K.rules_complete_kernel(board.to_array(), t.m, t.full_mask, t.rows,
                                        t.cols, t.boxes, t.unit_cells, t.popcount))
