"""Problem-generic DFS trial-and-error transcripts with multi-target labels.

A transcript is the tokenized record of a full solving run: the instance
prompt, the start token, rule-phase moves (each labeled with the set of all
currently forced moves), and where rules stall, guess-level tokens, guesses,
dead ends, and backtracking retries, ending in the end token.

Grammar conventions (the token sequence a generated transcript follows):

* prompt tokens, then s;
* rule phase: one forced move at a time; when the applied move completes the
  instance, e follows immediately;
* at an incomplete fixpoint: r, then the current guess-level token (the
  number of active guesses), then a guess;
* a guess that completes the instance is followed by r and then e (its rule
  phase is empty, and the end is only announced at the fixpoint);
* on conflict: d, then the level token of the deepest level that still has
  untried values, then a fresh guess on that same guess point. Levels whose
  alternatives are exhausted are popped silently; their refutation is the
  conflict already announced.

``target_sets[i]`` lists the valid ids for predicting ``tokens[i+1]``;
``loss_mask[i]`` is False while tokens[i+1] is still prompt (everything up
to and including s) and at the final position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import vocab as V
from .board import (
    Board, Move, candidates, detect_conflict, forced_move_set, propagate,
)
from . import _kernels as K
from .generator import PuzzlePair, SamplerMode, generate as generate_pairs
from .rng import make_rng
from .sat import (
    SatInstance, SatState, detect_conflict_sat, forced_moves_sat,
    generate_instance as generate_sat_instance, propagate_sat, write_instance,
)

SCHEMA_VERSION = 1
DEFAULT_MAX_TOKENS = 4096


class TranscriptError(RuntimeError):
    pass


class MaxLengthExceeded(TranscriptError):
    pass


class LevelOverflow(TranscriptError):
    pass


class NoBackdoor(TranscriptError):
    pass


class TranscriptFormatError(ValueError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass
class Transcript:
    tokens: list
    target_sets: list          # tuple of sorted ids per position
    loss_mask: list            # bool per position
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        assert len(self.target_sets) == len(self.tokens)
        assert len(self.loss_mask) == len(self.tokens)

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class BackdoorSet:
    """Action ids that, applied at a rule fixpoint and followed by rule
    propagation alone, complete the instance."""

    tokens: frozenset
    fixpoint: object


# ---------------------------------------------------------------------------
# problem adapters


class SudokuAdapter:
    """Carved-puzzle problems over immutable Board states."""

    def __init__(self, n: int):
        self.n = n
        self.vocab = V.Vocab("sudoku", n)

    def generate_instance(self, seed: int, stream: int = 0) -> PuzzlePair:
        return next(generate_pairs(self.n, 1, seed=seed + stream))

    def problem_tokens(self, instance: PuzzlePair) -> list:
        """Givens in row-major (r, c) order."""
        b = instance.puzzle
        out = []
        for r in range(1, b.m + 1):
            for c in range(1, b.m + 1):
                v = b.get(r, c)
                if v:
                    out.append(self.vocab.encode_move(Move(r, c, v)))
        return out

    def initial_solution(self, instance: PuzzlePair) -> Board:
        return instance.puzzle

    def logic_next_tokens(self, state: Board) -> set:
        return {self.vocab.encode_move(mv) for mv in forced_move_set(state)}

    def guess_next_tokens(self, state: Board, rng) -> list:
        """Candidate values of the minimum-remaining-candidates cell, ties
        broken by (r, c); ordering is left to the caller."""
        grid = candidates(state)
        m = state.m
        best = None
        best_cands = None
        for r in range(1, m + 1):
            for c in range(1, m + 1):
                if state.get(r, c):
                    continue
                cs = grid.candidates_of(r, c)
                if best is None or len(cs) < len(best_cands):
                    best, best_cands = (r, c), cs
        if best is None:
            return []
        return sorted(self.vocab.encode_move(Move(best[0], best[1], v))
                      for v in best_cands)

    def alternatives_next_tokens(self, guess_token: int, state: Board) -> list:
        mv = self.vocab.decode_move(guess_token)
        grid = candidates(state)
        return sorted(self.vocab.encode_move(Move(mv.r, mv.c, v))
                      for v in grid.candidates_of(mv.r, mv.c) if v != mv.v)

    def apply_token(self, state: Board, token: int) -> Board:
        return state.place(self.vocab.decode_move(token))

    def is_complete(self, state: Board) -> str:
        if detect_conflict(state) is not None:
            return "conflict"
        return "complete" if state.is_full() else "incomplete"

    # depth-1 extras

    def backdoor_tokens(self, state: Board) -> frozenset:
        t = K.tables(state.n)
        raw = K.backdoors_kernel(state.to_array(), t.m, t.full_mask, t.rows,
                                 t.cols, t.boxes, t.unit_cells, t.popcount)
        m = state.m
        return frozenset(self.vocab.encode_move(Move(int(i) // m + 1, int(i) % m + 1, int(v)))
                         for i, v in raw)

    def solution_tokens(self, instance: PuzzlePair) -> list:
        """One action token per cell in row-major order: the solved value."""
        sol = instance.solution
        return [self.vocab.encode_move(Move(r, c, sol.get(r, c)))
                for r in range(1, sol.m + 1) for c in range(1, sol.m + 1)]

    def meta_payload(self, instance: PuzzlePair) -> dict:
        return {"puzzle": instance.puzzle.to_single_line(),
                "solution": instance.solution.to_single_line()}


class SatAdapter:
    """1-in-3 SAT problems over copy-on-apply SatStates."""

    def __init__(self, nvars: int, nclauses: int):
        self.nvars = nvars
        self.nclauses = nclauses
        self.vocab = V.Vocab("onein3", nvars)

    def generate_instance(self, seed: int, stream: int = 0) -> SatInstance:
        return generate_sat_instance(self.nvars, self.nclauses, seed, stream)

    def problem_tokens(self, instance: SatInstance) -> list:
        return [self.vocab.encode_literal(lit)
                for clause in instance.clauses for lit in clause]

    def initial_solution(self, instance: SatInstance) -> SatState:
        return SatState(instance.nvars)

    def logic_next_tokens(self, state: SatState, instance: SatInstance = None) -> set:
        inst = instance if instance is not None else self._instance
        forced = forced_moves_sat(state, inst)
        return {self.vocab.encode_literal(l) for l in forced
                if state.values[abs(l)] == 0}

    def guess_next_tokens(self, state: SatState, rng) -> list:
        unassigned = [v for v in range(1, self.nvars + 1) if state.values[v] == 0]
        if not unassigned:
            return []
        var = int(unassigned[int(rng.integers(len(unassigned)))])
        return [self.vocab.encode_literal(var), self.vocab.encode_literal(-var)]

    def alternatives_next_tokens(self, guess_token: int, state: SatState) -> list:
        lit = self.vocab.decode_literal(guess_token)
        return [self.vocab.encode_literal(-lit)]

    def apply_token(self, state: SatState, token: int) -> SatState:
        out = state.copy()
        out.assign(self.vocab.decode_literal(token))
        return out

    def is_complete(self, state: SatState) -> str:
        if detect_conflict_sat(state, self._instance) is not None:
            return "conflict"
        return "complete" if state.is_total() else "incomplete"

    # the engine binds the instance before a run so state-only hooks can see it
    def bind(self, instance: SatInstance):
        self._instance = instance
        return self

    def backdoor_tokens(self, state: SatState) -> frozenset:
        out = set()
        for v in range(1, self.nvars + 1):
            if state.values[v] != 0:
                continue
            for lit in (v, -v):
                trial = state.copy()
                trial.assign(lit)
                trial, _ = propagate_sat(trial, self._instance)
                if trial.is_total() and detect_conflict_sat(trial, self._instance) is None:
                    out.add(self.vocab.encode_literal(lit))
        return frozenset(out)

    def meta_payload(self, instance: SatInstance) -> dict:
        return {"instance": write_instance(instance)}


# ---------------------------------------------------------------------------
# the DFS engine


@dataclass
class _Frame:
    snapshot: object
    order: list
    tried: int
    level: int

    def remaining(self):
        return self.order[self.tried:]


def _emitter(tokens, targets):
    def emit(tok, target_for_prev):
        if tokens:
            targets.append(tuple(sorted(target_for_prev)))
        tokens.append(tok)
    return emit


def generate_dfs_transcript(adapter, instance, seed: int, stream: int = 0,
                            max_tokens: int = DEFAULT_MAX_TOKENS) -> Transcript:
    """Full DFS solving transcript with per-position multi-target labels."""
    if isinstance(adapter, SatAdapter):
        adapter.bind(instance)
    vocab = adapter.vocab
    rng = make_rng(seed, stream, 3)
    tokens: list = []
    targets: list = []
    emit = _emitter(tokens, targets)

    for t in adapter.problem_tokens(instance):
        emit(t, ())
    emit(V.START, ())
    s_pos = len(tokens) - 1

    cur = adapter.initial_solution(instance)
    stack: list = []
    guesses = 0
    dead_ends = 0
    max_level = 0
    just_guessed = False
    solved = False

    while True:
        if len(tokens) >= max_tokens:
            raise MaxLengthExceeded(f"transcript exceeded {max_tokens} tokens")
        status = adapter.is_complete(cur)
        if status == "conflict":
            emit(V.DEAD_END, (V.DEAD_END,))
            dead_ends += 1
            while stack and not stack[-1].remaining():
                stack.pop()
            if not stack:
                raise TranscriptError("search space exhausted; instance unsolvable")
            frame = stack[-1]
            cur = frame.snapshot
            lvl_tok = V.level_token(frame.level)
            emit(lvl_tok, (lvl_tok,))
            remaining = frame.remaining()
            g = remaining[0]
            frame.tried += 1
            guesses += 1
            emit(g, tuple(remaining))
            cur = adapter.apply_token(cur, g)
            just_guessed = True
            continue
        if status == "complete":
            if just_guessed:
                emit(V.RULES_END, (V.RULES_END,))
            emit(V.END, (V.END,))
            solved = True
            break
        forced = adapter.logic_next_tokens(cur)
        if forced:
            choice = sorted(forced)[int(rng.integers(len(forced)))]
            emit(choice, tuple(forced))
            cur = adapter.apply_token(cur, choice)
            just_guessed = False
            continue
        # incomplete fixpoint: open a new guess level
        emit(V.RULES_END, (V.RULES_END,))
        level = len(stack) + 1
        if level > V.MAX_LEVEL:
            raise LevelOverflow(f"guess level {level} exceeds {V.MAX_LEVEL}")
        max_level = max(max_level, level)
        cands = adapter.guess_next_tokens(cur, rng)
        if not cands:
            raise TranscriptError("fixpoint incomplete but no guess candidates")
        order = [cands[i] for i in rng.permutation(len(cands))]
        frame = _Frame(snapshot=cur, order=order, tried=1, level=level)
        stack.append(frame)
        lvl_tok = V.level_token(level)
        emit(lvl_tok, (lvl_tok,))
        g = order[0]
        guesses += 1
        emit(g, tuple(order))
        cur = adapter.apply_token(cur, g)
        just_guessed = True

    targets.append(())  # final position predicts nothing
    mask = [s_pos <= i < len(tokens) - 1 for i in range(len(tokens))]
    meta = {
        "problem": f"{vocab.kind}{vocab.param}",
        "seed": seed,
        "stream": stream,
        "solved": solved,
        "guesses": guesses,
        "dead_ends": dead_ends,
        "max_level": max_level,
        "kind": "dfs",
    }
    meta.update(adapter.meta_payload(instance))
    return Transcript(tokens, targets, mask, meta)


def backdoors(board: Board) -> BackdoorSet:
    """Exhaustive backdoor set of a conflict-free, incomplete rule fixpoint."""
    res = propagate(board)
    if res.conflict is not None:
        raise TranscriptError("board is conflicted")
    if res.board.cells != board.cells:
        raise TranscriptError("board is not a rule fixpoint")
    if board.is_full():
        raise TranscriptError("board is already complete")
    adapter = SudokuAdapter(board.n)
    return BackdoorSet(adapter.backdoor_tokens(board), board)


def generate_depth1_transcript(adapter, instance, seed: int, stream: int = 0,
                               max_tokens: int = DEFAULT_MAX_TOKENS) -> Transcript:
    """Single-guess transcript: rules to the fixpoint, one sampled backdoor
    with the full backdoor set as its target, rules to completion.

    The guess node is the level-1 token; its scratchpad supervision (the
    solution action token of every cell, row-major) rides in the meta.
    Instances solved by rules alone or without a backdoor raise NoBackdoor.
    """
    if isinstance(adapter, SatAdapter):
        adapter.bind(instance)
    vocab = adapter.vocab
    rng = make_rng(seed, stream, 4)
    tokens: list = []
    targets: list = []
    emit = _emitter(tokens, targets)

    for t in adapter.problem_tokens(instance):
        emit(t, ())
    emit(V.START, ())
    s_pos = len(tokens) - 1

    cur = adapter.initial_solution(instance)
    while True:
        if len(tokens) >= max_tokens:
            raise MaxLengthExceeded(f"transcript exceeded {max_tokens} tokens")
        status = adapter.is_complete(cur)
        if status == "conflict":
            raise TranscriptError("instance conflicted during rule phase")
        if status == "complete":
            raise NoBackdoor("instance solved by rules alone")
        forced = adapter.logic_next_tokens(cur)
        if not forced:
            break
        choice = sorted(forced)[int(rng.integers(len(forced)))]
        emit(choice, tuple(forced))
        cur = adapter.apply_token(cur, choice)

    bset = adapter.backdoor_tokens(cur)
    if not bset:
        raise NoBackdoor("fixpoint has no single-guess completion")
    emit(V.RULES_END, (V.RULES_END,))
    lvl_tok = V.level_token(1)
    emit(lvl_tok, (lvl_tok,))
    guess_pos = len(tokens) - 1
    ordered = sorted(bset)
    g = ordered[int(rng.integers(len(ordered)))]
    emit(g, tuple(ordered))
    cur = adapter.apply_token(cur, g)

    just_guessed = True
    while True:
        if len(tokens) >= max_tokens:
            raise MaxLengthExceeded(f"transcript exceeded {max_tokens} tokens")
        status = adapter.is_complete(cur)
        if status == "conflict":
            raise TranscriptError("backdoor guess led to a conflict")
        if status == "complete":
            if just_guessed:
                emit(V.RULES_END, (V.RULES_END,))
            emit(V.END, (V.END,))
            break
        forced = adapter.logic_next_tokens(cur)
        if not forced:
            raise TranscriptError("backdoor did not complete by rules")
        choice = sorted(forced)[int(rng.integers(len(forced)))]
        emit(choice, tuple(forced))
        cur = adapter.apply_token(cur, choice)
        just_guessed = False

    targets.append(())
    mask = [s_pos <= i < len(tokens) - 1 for i in range(len(tokens))]
    meta = {
        "problem": f"{vocab.kind}{vocab.param}",
        "seed": seed,
        "stream": stream,
        "solved": True,
        "guesses": 1,
        "dead_ends": 0,
        "max_level": 1,
        "kind": "depth1",
        "guess_pos": guess_pos,
        "backdoors": sorted(bset),
    }
    if hasattr(adapter, "solution_tokens"):
        meta["scratchpad_targets"] = adapter.solution_tokens(instance)
    meta.update(adapter.meta_payload(instance))
    return Transcript(tokens, targets, mask, meta)


# ---------------------------------------------------------------------------
# replay and serialization


def replay(tokens, vocab: V.Vocab) -> dict:
    """Last-write-wins assignment from a token sequence; special tokens are
    skipped. Keys are (r, c) for Sudoku, variable index for SAT."""
    out: dict = {}
    for tok in tokens:
        tok = int(tok)
        if tok < V.ACTION_BASE:
            if tok < 0 or (tok >= V.LEVEL_BASE + V.MAX_LEVEL):
                raise TranscriptError(f"malformed token id {tok}")
            continue
        if not vocab.is_action(tok):
            raise TranscriptError(f"malformed token id {tok}")
        if vocab.kind == "sudoku":
            mv = vocab.decode_move(tok)
            out[(mv.r, mv.c)] = mv.v
        else:
            lit = vocab.decode_literal(tok)
            out[abs(lit)] = lit > 0
    return out


def replay_board(tokens, vocab: V.Vocab) -> Board:
    """Replay onto an empty board (givens are part of the tokens)."""
    n = vocab.param
    b = Board.empty(n)
    cells = list(b.cells)
    for (r, c), v in replay(tokens, vocab).items():
        cells[(r - 1) * (n * n) + (c - 1)] = v
    return Board(n, tuple(cells))


def serialize(transcript: Transcript) -> str:
    """One self-describing JSON line; exact round-trip via parse_line."""
    rec = {
        "v": SCHEMA_VERSION,
        "tokens": list(map(int, transcript.tokens)),
        "targets": [list(map(int, t)) for t in transcript.target_sets],
        "mask": [int(b) for b in transcript.loss_mask],
        "meta": transcript.meta,
    }
    return json.dumps(rec, separators=(",", ":"), sort_keys=True)


_KNOWN_FIELDS = {"v", "tokens", "targets", "mask", "meta"}


def parse_line(line: str, line_no: Optional[int] = None) -> Transcript:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise TranscriptFormatError(f"not valid JSON: {e}", line_no) from None
    if not isinstance(rec, dict) or "v" not in rec:
        raise TranscriptFormatError("missing schema version field 'v'", line_no)
    if rec["v"] != SCHEMA_VERSION:
        raise TranscriptFormatError(
            f"unsupported schema version {rec['v']} (this reader handles {SCHEMA_VERSION})",
            line_no)
    unknown = set(rec) - _KNOWN_FIELDS
    if unknown:
        raise TranscriptFormatError(
            f"unknown fields {sorted(unknown)} for schema version {SCHEMA_VERSION}",
            line_no)
    try:
        return Transcript(
            tokens=[int(t) for t in rec["tokens"]],
            target_sets=[tuple(int(x) for x in t) for t in rec["targets"]],
            loss_mask=[bool(b) for b in rec["mask"]],
            meta=rec["meta"],
        )
    except (KeyError, TypeError, AssertionError) as e:
        raise TranscriptFormatError(f"malformed record: {e!r}", line_no) from None


def parse_lines(lines):
    for i, line in enumerate(lines, start=1):
        if line.strip():
            yield parse_line(line, line_no=i)


def write_file(path: str, transcripts) -> int:
    n = 0
    with open(path, "w") as f:
        for t in transcripts:
            f.write(serialize(t) + "\n")
            n += 1
    return n


def read_file(path: str):
    with open(path) as f:
        yield from parse_lines(f)
