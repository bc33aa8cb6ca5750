"""Low-level Sudoku kernels.

Everything here works on flat ``int8`` cell arrays (0 = empty, 1..m = digit)
and is compiled with numba. The counting and propagation kernels dominate the
runtime of carving and of the 10k-puzzle benchmark sweeps, which is why they
live here rather than in the object layer.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Conflict codes shared with the object layer.
CONFLICT_NONE = 0
CONFLICT_DUPLICATE = 1
CONFLICT_EMPTY_CELL = 2
CONFLICT_NO_PLACE = 3

# Rule codes (bit positions match trialbench.board.RuleKind ordering).
RULE_NAKED = 0
RULE_HIDDEN_ROW = 1
RULE_HIDDEN_COL = 2
RULE_HIDDEN_BOX = 3


class _Tables:
    """Index tables for one block order n."""

    def __init__(self, n: int):
        m = n * n
        nc = m * m
        self.n = n
        self.m = m
        self.ncells = nc
        rows = np.empty(nc, np.int32)
        cols = np.empty(nc, np.int32)
        boxes = np.empty(nc, np.int32)
        for i in range(nc):
            r, c = divmod(i, m)
            rows[i] = r
            cols[i] = c
            boxes[i] = (r // n) * n + c // n
        self.rows, self.cols, self.boxes = rows, cols, boxes
        # unit -> member cells; units 0..m-1 rows, m..2m-1 cols, 2m..3m-1 boxes
        unit_cells = np.empty((3 * m, m), np.int32)
        for u in range(m):
            unit_cells[u] = np.flatnonzero(rows == u)
            unit_cells[m + u] = np.flatnonzero(cols == u)
            unit_cells[2 * m + u] = np.flatnonzero(boxes == u)
        self.unit_cells = unit_cells
        self.full_mask = np.uint32((1 << m) - 1)
        size = 1 << m
        pop = np.zeros(size, np.uint8)
        for x in range(1, size):
            pop[x] = pop[x >> 1] + (x & 1)
        self.popcount = pop
        lowbit = np.zeros(size, np.int8)
        for k in range(m):
            lowbit[1 << k] = k
        self.lowbit_index = lowbit


_TABLES: dict[int, _Tables] = {}


def tables(n: int) -> _Tables:
    if n not in _TABLES:
        if n not in (2, 3):
            raise ValueError(f"block order must be 2 or 3, got {n}")
        _TABLES[n] = _Tables(n)
    return _TABLES[n]


@njit(cache=True)
def _used_masks(cells, m, rows, cols, boxes):
    """Per-unit used-digit masks; duplicate cell index in [1] if any."""
    row_used = np.zeros(m, np.uint32)
    col_used = np.zeros(m, np.uint32)
    box_used = np.zeros(m, np.uint32)
    dup = -1
    for i in range(cells.shape[0]):
        v = cells[i]
        if v > 0:
            b = np.uint32(1 << (v - 1))
            if (row_used[rows[i]] & b) or (col_used[cols[i]] & b) or (box_used[boxes[i]] & b):
                if dup < 0:
                    dup = i
            row_used[rows[i]] |= b
            col_used[cols[i]] |= b
            box_used[boxes[i]] |= b
    return row_used, col_used, box_used, dup


@njit(cache=True)
def candidates_kernel(cells, m, full, rows, cols, boxes):
    """Candidate bitmask per cell; filled cells get their singleton."""
    row_used, col_used, box_used, _ = _used_masks(cells, m, rows, cols, boxes)
    out = np.empty(cells.shape[0], np.uint32)
    for i in range(cells.shape[0]):
        v = cells[i]
        if v > 0:
            out[i] = np.uint32(1 << (v - 1))
        else:
            out[i] = full & ~(row_used[rows[i]] | col_used[cols[i]] | box_used[boxes[i]])
    return out


@njit(cache=True)
def detect_conflict_kernel(cells, m, full, rows, cols, boxes, unit_cells, pop):
    """First conflict by scan order.

    Returns (code, a, b): duplicate -> a = cell; empty-cell -> a = cell;
    no-place -> a = unit index (0..3m-1), b = digit.
    """
    row_used, col_used, box_used, dup = _used_masks(cells, m, rows, cols, boxes)
    if dup >= 0:
        return CONFLICT_DUPLICATE, dup, 0
    cand = np.empty(cells.shape[0], np.uint32)
    for i in range(cells.shape[0]):
        if cells[i] == 0:
            c = full & ~(row_used[rows[i]] | col_used[cols[i]] | box_used[boxes[i]])
            if c == 0:
                return CONFLICT_EMPTY_CELL, i, 0
            cand[i] = c
        else:
            cand[i] = np.uint32(1 << (cells[i] - 1))
    for u in range(3 * m):
        placed = np.uint32(0)
        avail = np.uint32(0)
        for k in range(m):
            i = unit_cells[u, k]
            if cells[i] > 0:
                placed |= np.uint32(1 << (cells[i] - 1))
            else:
                avail |= cand[i]
        missing = full & ~placed
        if missing & ~avail:
            d = 0
            rest = missing & ~avail
            while not (rest & np.uint32(1 << d)):
                d += 1
            return CONFLICT_NO_PLACE, u, d + 1
    return CONFLICT_NONE, 0, 0


@njit(cache=True)
def forced_moves_kernel(cells, m, full, rows, cols, boxes, unit_cells):
    """All (cell, digit, rule) justifications on the current board.

    A move backed by several rules is reported once per rule.
    """
    row_used, col_used, box_used, _ = _used_masks(cells, m, rows, cols, boxes)
    nc = cells.shape[0]
    cand = np.zeros(nc, np.uint32)
    out = np.empty((4 * nc, 3), np.int32)
    k = 0
    for i in range(nc):
        if cells[i] == 0:
            c = full & ~(row_used[rows[i]] | col_used[cols[i]] | box_used[boxes[i]])
            cand[i] = c
            if c != 0 and (c & (c - np.uint32(1))) == 0:
                d = 0
                while not (c & np.uint32(1 << d)):
                    d += 1
                out[k, 0] = i
                out[k, 1] = d + 1
                out[k, 2] = RULE_NAKED
                k += 1
    for u in range(3 * m):
        rule = RULE_HIDDEN_ROW + u // m
        for d in range(m):
            bit = np.uint32(1 << d)
            cnt = 0
            pos = -1
            placed = False
            for j in range(m):
                i = unit_cells[u, j]
                if cells[i] == d + 1:
                    placed = True
                    break
                if cells[i] == 0 and (cand[i] & bit):
                    cnt += 1
                    pos = i
            if not placed and cnt == 1:
                out[k, 0] = pos
                out[k, 1] = d + 1
                out[k, 2] = rule
                k += 1
    return out[:k]


@njit(cache=True)
def propagate_kernel(cells, m, full, rows, cols, boxes, unit_cells, pop):
    """Apply forced moves to a fixpoint, stopping at the first conflict.

    Mutates ``cells``. Returns (trace, code, a, b) where trace rows are
    (cell, digit) in application order and (code, a, b) mirrors
    detect_conflict_kernel.
    """
    nc = cells.shape[0]
    trace = np.empty((nc, 2), np.int32)
    t = 0
    while True:
        code, a, b = detect_conflict_kernel(cells, m, full, rows, cols, boxes, unit_cells, pop)
        if code != CONFLICT_NONE:
            return trace[:t], code, a, b
        moves = forced_moves_kernel(cells, m, full, rows, cols, boxes, unit_cells)
        if moves.shape[0] == 0:
            return trace[:t], CONFLICT_NONE, 0, 0
        cells[moves[0, 0]] = moves[0, 1]
        trace[t, 0] = moves[0, 0]
        trace[t, 1] = moves[0, 1]
        t += 1


@njit(cache=True)
def count_solutions_kernel(cells0, m, full, rows, cols, boxes, pop, lowbit, limit, sol_out):
    """Number of completions, truncated at ``limit``.

    MRV depth-first search over candidate bitmasks. The first two solutions
    found are copied into ``sol_out`` (shape (2, m*m)).
    """
    nc = cells0.shape[0]
    cells = cells0.copy()
    row_used = np.zeros(m, np.uint32)
    col_used = np.zeros(m, np.uint32)
    box_used = np.zeros(m, np.uint32)
    for i in range(nc):
        v = cells[i]
        if v > 0:
            b = np.uint32(1 << (v - 1))
            if (row_used[rows[i]] & b) or (col_used[cols[i]] & b) or (box_used[boxes[i]] & b):
                return 0
            row_used[rows[i]] |= b
            col_used[cols[i]] |= b
            box_used[boxes[i]] |= b
    if limit <= 0:
        return 0
    stack_cell = np.empty(nc + 1, np.int32)
    stack_rest = np.empty(nc + 1, np.uint32)
    depth = 0
    count = 0
    descend = True
    while True:
        if descend:
            best = -1
            best_cnt = m + 1
            best_mask = np.uint32(0)
            for i in range(nc):
                if cells[i] == 0:
                    mask = full & ~(row_used[rows[i]] | col_used[cols[i]] | box_used[boxes[i]])
                    cnt = pop[mask]
                    if cnt == 0:
                        best = i
                        best_cnt = 0
                        break
                    if cnt < best_cnt:
                        best = i
                        best_cnt = cnt
                        best_mask = mask
                        if cnt == 1:
                            break
            if best == -1:
                if count < 2:
                    for i in range(nc):
                        sol_out[count, i] = cells[i]
                count += 1
                if count >= limit:
                    return count
                descend = False
            elif best_cnt == 0:
                descend = False
            else:
                stack_cell[depth] = best
                stack_rest[depth] = best_mask
                depth += 1
                bit = best_mask & (~best_mask + np.uint32(1))
                stack_rest[depth - 1] = best_mask & ~bit
                v = lowbit[bit] + 1
                cells[best] = v
                row_used[rows[best]] |= bit
                col_used[cols[best]] |= bit
                box_used[boxes[best]] |= bit
        else:
            if depth == 0:
                return count
            i = stack_cell[depth - 1]
            v = cells[i]
            bit = np.uint32(1 << (v - 1))
            cells[i] = 0
            row_used[rows[i]] &= ~bit
            col_used[cols[i]] &= ~bit
            box_used[boxes[i]] &= ~bit
            rest = stack_rest[depth - 1]
            if rest == 0:
                depth -= 1
            else:
                nb = rest & (~rest + np.uint32(1))
                stack_rest[depth - 1] = rest & ~nb
                nv = lowbit[nb] + 1
                cells[i] = nv
                row_used[rows[i]] |= nb
                col_used[cols[i]] |= nb
                box_used[boxes[i]] |= nb
                descend = True


@njit(cache=True)
def fill_random_kernel(m, full, rows, cols, boxes, pop, lowbit, priority, value_orders):
    """Complete an empty grid by DFS.

    Cell choice is minimum-remaining-candidates with ties broken by the
    ``priority`` permutation; values are tried in the per-depth order given
    by ``value_orders`` (ncells × m, digits 1..m). Both arrays come from a
    seeded generator, so the result is a deterministic function of them.
    """
    nc = rows.shape[0]
    cells = np.zeros(nc, np.int8)
    row_used = np.zeros(m, np.uint32)
    col_used = np.zeros(m, np.uint32)
    box_used = np.zeros(m, np.uint32)
    stack_cell = np.empty(nc + 1, np.int32)
    stack_k = np.empty(nc + 1, np.int32)
    depth = 0
    advancing = False  # True: retry a new value at stack top, False: pick a cell
    while True:
        if not advancing:
            if depth == nc:
                return cells
            best = -1
            best_cnt = m + 1
            best_pri = nc + 1
            for i in range(nc):
                if cells[i] == 0:
                    mask = full & ~(row_used[rows[i]] | col_used[cols[i]] | box_used[boxes[i]])
                    cnt = pop[mask]
                    if cnt < best_cnt or (cnt == best_cnt and priority[i] < best_pri):
                        best = i
                        best_cnt = cnt
                        best_pri = priority[i]
            if best_cnt == 0:
                depth -= 1  # dead end: retry the last placed cell
                advancing = True
                continue
            stack_cell[depth] = best
            stack_k[depth] = -1
            advancing = True
            continue
        if depth < 0:
            return cells  # no grid exists; cannot happen for valid m
        i = stack_cell[depth]
        v_old = cells[i]
        if v_old > 0:
            bit = np.uint32(1 << (v_old - 1))
            cells[i] = 0
            row_used[rows[i]] &= ~bit
            col_used[cols[i]] &= ~bit
            box_used[boxes[i]] &= ~bit
        mask = full & ~(row_used[rows[i]] | col_used[cols[i]] | box_used[boxes[i]])
        k = stack_k[depth] + 1
        placed = False
        while k < m:
            v = value_orders[depth, k]
            bit = np.uint32(1 << (v - 1))
            if mask & bit:
                cells[i] = v
                row_used[rows[i]] |= bit
                col_used[cols[i]] |= bit
                box_used[boxes[i]] |= bit
                stack_k[depth] = k
                depth += 1
                placed = True
                advancing = False
                break
            k += 1
        if not placed:
            depth -= 1


@njit(cache=True)
def rules_complete_kernel(cells0, m, full, rows, cols, boxes, unit_cells, pop):
    """1 if forced moves alone complete the board without conflict, else 0."""
    cells = cells0.copy()
    _, code, _, _ = propagate_kernel(cells, m, full, rows, cols, boxes, unit_cells, pop)
    if code != CONFLICT_NONE:
        return 0
    for i in range(cells.shape[0]):
        if cells[i] == 0:
            return 0
    return 1


@njit(cache=True)
def backdoors_kernel(cells, m, full, rows, cols, boxes, unit_cells, pop):
    """All (cell, digit) guesses after which forced moves finish the board.

    Expects ``cells`` to already be a conflict-free rule fixpoint.
    """
    nc = cells.shape[0]
    row_used, col_used, box_used, _ = _used_masks(cells, m, rows, cols, boxes)
    out = np.empty((nc * m, 2), np.int32)
    k = 0
    for i in range(nc):
        if cells[i] != 0:
            continue
        cand = full & ~(row_used[rows[i]] | col_used[cols[i]] | box_used[boxes[i]])
        for d in range(m):
            if not (cand & np.uint32(1 << d)):
                continue
            trial = cells.copy()
            trial[i] = d + 1
            if rules_complete_kernel(trial, m, full, rows, cols, boxes, unit_cells, pop):
                out[k, 0] = i
                out[k, 1] = d + 1
                k += 1
    return out[:k]


@njit(cache=True)
def carve_kernel(solution, order, m, full, rows, cols, boxes, pop, lowbit):
    """Remove entries in the given cell order, keeping the solution unique.

    Returns the carved puzzle; ``order`` is a permutation of all cell indices.
    """
    cells = solution.copy()
    sol_out = np.empty((2, cells.shape[0]), np.int8)
    for t in range(order.shape[0]):
        i = order[t]
        keep = cells[i]
        cells[i] = 0
        cnt = count_solutions_kernel(cells, m, full, rows, cols, boxes, pop, lowbit, 2, sol_out)
        if cnt != 1:
            cells[i] = keep
    return cells
