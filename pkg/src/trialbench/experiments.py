"""Experiment drivers: toy-scale training runs and the contextual min-sum
set cover loss comparison. These back the acceptance suite and the demos.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import vocab as V
from .board import Board
from .decoding import decode_greedy_batch
from .evalbench import rule_logic_correct
from .generator import generate
from .model import Model, ModelConfig
from .mssc import (
    ContextualPolicy, LossKind, expected_guesses, simulate_guesses,
    train_contextual,
)
from .rng import make_rng
from .training import TrainConfig, TrainResult, train
from .transcripts import SudokuAdapter, Transcript, generate_dfs_transcript


def transcript_stream(n: int, seed: int, count: Optional[int] = None,
                      start: int = 0):
    """Fresh DFS transcripts, one per instance; stream-like training data."""
    ad = SudokuAdapter(n)
    i = start
    produced = 0
    while count is None or produced < count:
        inst = ad.generate_instance(seed=seed, stream=i)
        try:
            yield generate_dfs_transcript(ad, inst, seed=seed, stream=i)
            produced += 1
        except Exception:
            pass  # overflow counts as a generation failure; skip the instance
        i += 1


def eval_prompts(pairs, vocab):
    prompts = []
    for pair in pairs:
        p = pair.puzzle
        toks = []
        for r in range(1, p.m + 1):
            for c in range(1, p.m + 1):
                v = p.get(r, c)
                if v:
                    from .board import Move
                    toks.append(vocab.encode_move(Move(r, c, v)))
        toks.append(V.START)
        prompts.append(toks)
    return prompts


def eval_board_accuracy(model: Model, pairs, vocab, max_len: int = 160) -> float:
    """Greedy-decode every puzzle (batched by prompt length) and score exact
    full-board matches of the replayed assignment against the solution."""
    prompts = eval_prompts(pairs, vocab)
    by_len = {}
    for i, p in enumerate(prompts):
        by_len.setdefault(len(p), []).append(i)
    good = 0
    for L, idxs in by_len.items():
        outs, _ = decode_greedy_batch(model, [prompts[i] for i in idxs], max_len)
        for i, out in zip(idxs, outs):
            sol = pairs[i].solution
            board = _replay_onto(pairs[i].puzzle, out, vocab)
            good += board.cells == sol.cells
    return good / len(pairs)


def eval_rule_logic_accuracy(model: Model, pairs, vocab, max_len: int = 160) -> float:
    prompts = eval_prompts(pairs, vocab)
    by_len = {}
    for i, p in enumerate(prompts):
        by_len.setdefault(len(p), []).append(i)
    good = 0
    for L, idxs in by_len.items():
        outs, _ = decode_greedy_batch(model, [prompts[i] for i in idxs], max_len)
        for i, out in zip(idxs, outs):
            good += rule_logic_correct(pairs[i].puzzle, out, vocab)
    return good / len(pairs)


def _replay_onto(puzzle: Board, tokens, vocab) -> Board:
    cells = list(puzzle.cells)
    m = puzzle.m
    for tok in tokens:
        if vocab.is_action(int(tok)):
            mv = vocab.decode_move(int(tok))
            cells[(mv.r - 1) * m + (mv.c - 1)] = mv.v
    return Board(puzzle.n, tuple(cells))


@dataclass
class BoardAccuracyRun:
    result: TrainResult
    history: list                 # (step, tokens_seen, board_accuracy)
    reached: bool
    cpu_minutes: float
    final_accuracy: float


def train_board_accuracy(n: int = 2, seed: int = 0, target: float = 0.9,
                         steps: int = 4000, batch_size: int = 32,
                         lr_peak: float = 2e-3, eval_every: int = 100,
                         eval_count: int = 200, multi_target: bool = True,
                         layers: int = 3, heads: int = 4, embed_dim: int = 64,
                         budget_minutes: float = 30.0) -> BoardAccuracyRun:
    """Stream-train a small model and track held-out board accuracy, stopping
    early once the target is reached or the CPU budget runs out."""
    ad = SudokuAdapter(n)
    cfg = ModelConfig(vocab_size=ad.vocab.size, layers=layers, heads=heads,
                      embed_dim=embed_dim, max_positions=256)
    model = Model(cfg, seed=seed)
    heldout = list(generate(n, eval_count, seed=seed + 900_000))
    history = []
    t0 = time.process_time()

    def hook(step, mdl):
        acc = eval_board_accuracy(mdl, heldout, ad.vocab)
        history.append((step, acc))
        if acc >= target:
            return True
        return (time.process_time() - t0) / 60 > budget_minutes

    tc = TrainConfig(batch_size=batch_size, steps=steps, lr_peak=lr_peak,
                     multi_target=multi_target, seed=seed)
    mdl_result = train(model, transcript_stream(n, seed=seed + 1), tc,
                       hook=hook, log_every=eval_every)
    minutes = (time.process_time() - t0) / 60
    final = history[-1][1] if history else 0.0
    return BoardAccuracyRun(mdl_result, history, final >= target, minutes, final)


@dataclass
class TokenEfficiencyRun:
    tokens_multi: Optional[int]
    tokens_single: Optional[int]
    history_multi: list
    history_single: list


def token_efficiency_comparison(n: int = 2, seed: int = 0, target: float = 0.9,
                                steps: int = 4000, lr_peak: float = 2e-3,
                                eval_every: int = 50, eval_count: int = 150,
                                layers: int = 3, heads: int = 4,
                                embed_dim: int = 64) -> TokenEfficiencyRun:
    """Train the multi-target and single-target variants on the same stream
    and record tokens seen when each first reaches the rule-logic target."""
    ad = SudokuAdapter(n)
    heldout = list(generate(n, eval_count, seed=seed + 901_000))
    out = {}
    hist = {}
    for variant, multi in (("multi", True), ("single", False)):
        cfg = ModelConfig(vocab_size=ad.vocab.size, layers=layers, heads=heads,
                          embed_dim=embed_dim, max_positions=256)
        model = Model(cfg, seed=seed)
        reached = {"tokens": None}
        history = []

        def hook(step, mdl, _reached=reached, _hist=history):
            acc = eval_rule_logic_accuracy(mdl, heldout, ad.vocab)
            tokens = trainer_tokens[0]
            _hist.append((step, tokens, acc))
            if acc >= target and _reached["tokens"] is None:
                _reached["tokens"] = tokens
                return True
            return False

        tc = TrainConfig(batch_size=32, steps=steps, lr_peak=lr_peak,
                         multi_target=multi, seed=seed)
        trainer_tokens = [0]

        # wrap the stream so the hook can read a live token counter
        def counting_stream():
            for tr in transcript_stream(n, seed=seed + 1):
                trainer_tokens[0] += len(tr.tokens)
                yield tr

        train(model, counting_stream(), tc, hook=hook, log_every=eval_every)
        out[variant] = reached["tokens"]
        hist[variant] = history
    return TokenEfficiencyRun(out["multi"], out["single"],
                              hist["multi"], hist["single"])


# ---------------------------------------------------------------------------
# contextual MSSC: expected-trials loss vs weighted cross-entropy


def contextual_family_dataset(n: int, count: int, seed: int):
    """Example-marginals family with shuffled roles: the context one-hot
    identifies which choice plays the rare singleton; the other n-1 choices
    form the 2/3-probability bulk scenario."""
    rng = make_rng(seed, 41)
    data = []
    for _ in range(count):
        special = int(rng.integers(n)) + 1
        bulk = frozenset(i for i in range(1, n + 1) if i != special)
        x = np.zeros(n)
        x[special - 1] = 1.0
        s = bulk if rng.random() < 2 / 3 else frozenset([special])
        data.append((x, s))
    return data


@dataclass
class ContextualComparison:
    mean_guesses_l1: float
    mean_guesses_ce: float
    expected_l1: float
    expected_ce: float


def contextual_loss_comparison(n: int = 20, train_count: int = 4000,
                               test_count: int = 1500, epochs: int = 25,
                               seed: int = 0) -> ContextualComparison:
    train_data = contextual_family_dataset(n, train_count, seed)
    test_data = contextual_family_dataset(n, test_count, seed + 1)
    pol_l1 = train_contextual(train_data, n=n, d=n, loss=LossKind.LOG_L1,
                              epochs=epochs, lr=0.8, seed=seed)
    pol_ce = train_contextual(train_data, n=n, d=n, loss=LossKind.WEIGHTED_CE,
                              epochs=epochs, lr=0.8, seed=seed)
    sim_l1 = simulate_guesses(pol_l1, test_data, seed=seed + 2)
    sim_ce = simulate_guesses(pol_ce, test_data, seed=seed + 3)
    return ContextualComparison(
        float(np.mean(sim_l1)), float(np.mean(sim_ce)),
        expected_guesses(pol_l1, test_data), expected_guesses(pol_ce, test_data))
