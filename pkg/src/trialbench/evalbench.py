"""Evaluation metrics, model-free guessing oracles, and benchmark drivers.

The two oracles bracket how well a guesser can pick backdoors at a rule
fixpoint: the upper-bound oracle knows the full solution and samples a
uniformly random unfilled cell (assigning its true value); the lower-bound
oracle samples a uniformly random non-conflicting (cell, value) candidate.
Each repeats independently until the sample is a backdoor, so the per-puzzle
guess count is geometric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import _kernels as K
from .board import Board, propagate, solve_unique
from .generator import SamplerMode, generate
from .rng import make_rng
from .sat import SatInstance, check_solution
from . import vocab as V

ORACLE_CAP = 10 ** 6


@dataclass
class EvalReport:
    board_accuracy: float
    cell_accuracy: float
    rule_logic_accuracy: Optional[float]
    boards: int
    failures: dict = field(default_factory=dict)


def board_cell_accuracy(preds: Iterable[Board], truths: Iterable[Board]):
    """(exact full-grid match fraction, per-cell match fraction)."""
    preds = list(preds)
    truths = list(truths)
    if len(preds) != len(truths):
        raise ValueError("prediction/truth length mismatch")
    if not preds:
        raise ValueError("empty evaluation set")
    boards = 0
    cells = 0
    ncells = 0
    for p, t in zip(preds, truths):
        if p.cells == t.cells:
            boards += 1
        cells += sum(1 for a, b in zip(p.cells, t.cells) if a == b)
        ncells += len(t.cells)
    return boards / len(preds), cells / ncells


def sat_board_accuracy(instances: Iterable[SatInstance], assignments) -> float:
    """Fraction of assignments satisfying exactly one literal per clause."""
    instances = list(instances)
    assignments = list(assignments)
    if len(instances) != len(assignments):
        raise ValueError("prediction/truth length mismatch")
    good = sum(1 for inst, a in zip(instances, assignments)
               if a is not None and check_solution(inst, a))
    return good / len(instances)


def rule_resolvable_cells(puzzle: Board) -> dict:
    """(r, c) -> digit for every cell the rule fixpoint fills."""
    res = propagate(puzzle)
    return {(mv.r, mv.c): mv.v for mv in res.trace}


def rule_logic_correct(puzzle: Board, generated_tokens, vocab: V.Vocab) -> bool:
    """True iff every rule-resolvable cell is emitted with its fixpoint value
    before the first r or e token (last write wins)."""
    resolvable = rule_resolvable_cells(puzzle)
    emitted: dict = {}
    for tok in generated_tokens:
        tok = int(tok)
        if tok in (V.RULES_END, V.END):
            break
        if vocab.is_action(tok):
            mv = vocab.decode_move(tok)
            emitted[(mv.r, mv.c)] = mv.v
    return all(emitted.get(cell) == v for cell, v in resolvable.items())


def rule_logic_accuracy(decode_fn, puzzles: Iterable[Board], vocab: V.Vocab) -> float:
    """decode_fn maps a prompt token list to generated tokens (prompt not
    included); a board counts only if all rule-resolvable cells are right."""
    puzzles = list(puzzles)
    good = 0
    for p in puzzles:
        prompt = _prompt_tokens(p, vocab)
        good += rule_logic_correct(p, decode_fn(prompt), vocab)
    return good / len(puzzles)


def _prompt_tokens(puzzle: Board, vocab: V.Vocab) -> list:
    from .board import Move
    out = []
    for r in range(1, puzzle.m + 1):
        for c in range(1, puzzle.m + 1):
            v = puzzle.get(r, c)
            if v:
                out.append(vocab.encode_move(Move(r, c, v)))
    out.append(V.START)
    return out


# ---------------------------------------------------------------------------
# oracles


def _fixpoint_and_backdoors(puzzle: Board):
    t = K.tables(puzzle.n)
    cells = puzzle.to_array()
    K.propagate_kernel(cells, t.m, t.full_mask, t.rows, t.cols, t.boxes,
                       t.unit_cells, t.popcount)
    raw = K.backdoors_kernel(cells, t.m, t.full_mask, t.rows, t.cols, t.boxes,
                             t.unit_cells, t.popcount)
    return cells, raw


def oracle_upper(puzzle: Board, rng: np.random.Generator,
                 cap: int = ORACLE_CAP) -> Optional[int]:
    """Guesses until a uniformly random unfilled cell of the rule fixpoint
    (given its true value) is a backdoor; None if the cap is hit."""
    cells, raw = _fixpoint_and_backdoors(puzzle)
    unfilled = np.flatnonzero(cells == 0)
    if len(unfilled) == 0 or len(raw) == 0:
        raise ValueError("oracle needs an incomplete fixpoint with a backdoor")
    backdoor_cells = set(int(i) for i, _ in raw)
    for trial in range(1, cap + 1):
        cell = int(unfilled[int(rng.integers(len(unfilled)))])
        if cell in backdoor_cells:
            return trial
    return None


def oracle_lower(puzzle: Board, rng: np.random.Generator,
                 cap: int = ORACLE_CAP) -> Optional[int]:
    """Guesses until a uniformly random non-conflicting (cell, value) pair of
    the rule fixpoint is a backdoor; None if the cap is hit.

    The pool is a superset of the upper oracle's (every remaining candidate
    value, not just the correct one), so it is stochastically slower.
    """
    t = K.tables(puzzle.n)
    cells, raw = _fixpoint_and_backdoors(puzzle)
    if len(raw) == 0:
        raise ValueError("oracle needs an incomplete fixpoint with a backdoor")
    cand = K.candidates_kernel(cells, t.m, t.full_mask, t.rows, t.cols, t.boxes)
    pairs = []
    for i in np.flatnonzero(cells == 0):
        mask = int(cand[i])
        for d in range(t.m):
            if mask >> d & 1:
                pairs.append((int(i), d + 1))
    backdoors = set((int(i), int(v)) for i, v in raw)
    for trial in range(1, cap + 1):
        pair = pairs[int(rng.integers(len(pairs)))]
        if pair in backdoors:
            return trial
    return None


def oracle_expected_upper(puzzle: Board) -> float:
    """Per-puzzle E[guesses] = fixpoint blanks / backdoors (geometric mean
    parameter of the upper oracle)."""
    cells, raw = _fixpoint_and_backdoors(puzzle)
    unfilled = int((cells == 0).sum())
    if len(raw) == 0:
        raise ValueError("no backdoor")
    return unfilled / len(raw)


def oracle_expected_lower(puzzle: Board) -> float:
    """Per-puzzle E[guesses] = fixpoint candidate pairs / backdoors."""
    t = K.tables(puzzle.n)
    cells, raw = _fixpoint_and_backdoors(puzzle)
    if len(raw) == 0:
        raise ValueError("no backdoor")
    cand = K.candidates_kernel(cells, t.m, t.full_mask, t.rows, t.cols, t.boxes)
    pairs = sum(int(t.popcount[cand[i]]) for i in np.flatnonzero(cells == 0))
    return pairs / len(raw)


# ---------------------------------------------------------------------------
# backdoor census


@dataclass
class BackdoorCensus:
    count: int
    rules_complete: int
    one_guess: int
    neither: int
    backdoor_counts: list          # per one-guess puzzle: number of backdoors

    @property
    def covered_fraction(self) -> float:
        """Rules-complete or solvable with a single backdoor guess."""
        return (self.rules_complete + self.one_guess) / self.count


def backdoor_census(count: int, seed: int, n: int = 3,
                    mode: SamplerMode = SamplerMode.FAST) -> BackdoorCensus:
    """Classify carved puzzles as rules-complete, one-guess-solvable, or
    neither; classifications are mutually exclusive and exhaustive."""
    rules_complete = 0
    one_guess = 0
    neither = 0
    bcounts = []
    t = K.tables(n)
    for pair in generate(n, count, seed=seed, mode=mode):
        cells = pair.puzzle.to_array()
        K.propagate_kernel(cells, t.m, t.full_mask, t.rows, t.cols, t.boxes,
                           t.unit_cells, t.popcount)
        if (cells != 0).all():
            rules_complete += 1
            continue
        raw = K.backdoors_kernel(cells, t.m, t.full_mask, t.rows, t.cols,
                                 t.boxes, t.unit_cells, t.popcount)
        if len(raw):
            one_guess += 1
            bcounts.append(len(raw))
        else:
            neither += 1
    return BackdoorCensus(count, rules_complete, one_guess, neither, bcounts)


# ---------------------------------------------------------------------------
# histograms


@dataclass
class GuessHistogram:
    counts: list
    cumulative: list               # (guesses, fraction solved within) pairs
    median: float

    def to_csv(self) -> str:
        lines = ["guesses,fraction_solved"]
        for k, f in self.cumulative:
            lines.append(f"{k},{f:.6f}")
        return "\n".join(lines) + "\n"


def guess_histogram(counts) -> GuessHistogram:
    """Cumulative curve over integer guess counts and its median, read off
    the piecewise-linear cumulative histogram (if half the mass sits at 1,
    the median is 1; otherwise interpolate between adjacent integers)."""
    counts = [int(c) for c in counts]
    if not counts:
        raise ValueError("no guess counts")
    n = len(counts)
    top = max(counts)
    cumulative = []
    acc = 0
    by = np.bincount(counts, minlength=top + 1)
    for k in range(1, top + 1):
        acc += int(by[k])
        cumulative.append((k, acc / n))
    median = None
    prev_k, prev_f = 1, cumulative[0][1]
    if prev_f >= 0.5:
        median = 1.0
    else:
        for k, f in cumulative[1:]:
            if f >= 0.5:
                median = prev_k + (0.5 - prev_f) / (f - prev_f) * (k - prev_k)
                break
            prev_k, prev_f = k, f
    return GuessHistogram(counts, cumulative, float(median))


@dataclass
class OracleReport:
    """Oracle statistics over carved puzzles whose rule fixpoint is
    incomplete and has at least one backdoor (the ~0.2% with none cannot
    terminate and are skipped; rules-complete puzzles are outside the
    guessing population)."""

    upper_hist: GuessHistogram           # simulated single runs per puzzle
    lower_hist: GuessHistogram
    upper_expected_median: float         # median of per-puzzle E[guesses]
    lower_expected_median: float
    puzzles: int
    skipped: int

    def to_csv(self) -> str:
        lines = ["oracle,guesses,fraction_solved"]
        for name, hist in (("upper", self.upper_hist), ("lower", self.lower_hist)):
            for k, f in hist.cumulative:
                lines.append(f"{name},{k},{f:.6f}")
        return "\n".join(lines) + "\n"


def oracle_median_run(count: int, seed: int, n: int = 3,
                      mode: SamplerMode = SamplerMode.FAST) -> OracleReport:
    """Simulated guess counts plus the theoretical per-puzzle expectations
    for both oracles. The published reference curves are the theoretical
    ones (a single simulated draw sits below its mean more often than not,
    so the simulated median is smaller)."""
    t = K.tables(n)
    rng = make_rng(seed, 7)
    upper = []
    lower = []
    e_upper = []
    e_lower = []
    skipped = 0
    produced = 0
    stream = 0
    while produced < count:
        pair = next(generate(n, 1, seed=seed + stream, mode=mode))
        stream += 1
        cells, raw = _fixpoint_and_backdoors(pair.puzzle)
        if (cells != 0).all():
            continue  # rules-complete: no guessing population member
        if len(raw) == 0:
            skipped += 1
            continue
        unfilled = np.flatnonzero(cells == 0)
        bd_cells = set(int(i) for i, _ in raw)
        cand = K.candidates_kernel(cells, t.m, t.full_mask, t.rows, t.cols, t.boxes)
        pairs = [(int(i), d + 1) for i in unfilled
                 for d in range(t.m) if int(cand[i]) >> d & 1]
        bd_pairs = set((int(i), int(v)) for i, v in raw)
        u = _sim_until(rng, lambda: int(unfilled[int(rng.integers(len(unfilled)))]) in bd_cells)
        l = _sim_until(rng, lambda: pairs[int(rng.integers(len(pairs)))] in bd_pairs)
        if u is None or l is None:
            skipped += 1
            continue
        upper.append(u)
        lower.append(l)
        e_upper.append(len(unfilled) / len(raw))
        e_lower.append(len(pairs) / len(raw))
        produced += 1
    return OracleReport(guess_histogram(upper), guess_histogram(lower),
                        float(np.median(e_upper)), float(np.median(e_lower)),
                        produced, skipped)


def _sim_until(rng, success, cap: int = ORACLE_CAP):
    for trial in range(1, cap + 1):
        if success():
            return trial
    return None
