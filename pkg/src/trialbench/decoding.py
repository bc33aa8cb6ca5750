"""Decoding: greedy next-token generation and the single-guess restart loop.

The restart decoder follows the one-level-guessing protocol: greedy rule
imitation until the model announces the guess node, one forward pass with
the scratchpad window appended to read the guess distribution, a sampled
guess with the scratchpad removed, then greedy rule imitation again. If the
run does not end in a verified solution, everything restarts from the
prompt with no memory; each sampled guess counts once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import vocab as V
from .model import scratchpad_mask
from .rng import make_rng


def decode_greedy(model, prompt, max_len: int = 512):
    """Argmax continuation of one prompt until the end token or max_len.
    Returns (generated tokens, hit_max flag)."""
    ids = list(prompt)
    out = []
    logits, kv = model.infer_prefill(np.array([ids], dtype=np.int64))
    pos = len(ids)
    for _ in range(max_len):
        tok = int(np.argmax(logits[0]))
        out.append(tok)
        if tok == V.END:
            return out, False
        logits = model.infer_step(kv, np.array([tok]), np.array([pos]))
        pos += 1
    return out, True


def decode_greedy_batch(model, prompts, max_len: int = 512):
    """Greedy continuations for same-length prompts, decoded together.
    Sequences that already emitted the end token keep stepping but their
    extra tokens are dropped from the result."""
    assert len({len(p) for p in prompts}) == 1
    B = len(prompts)
    ids = np.array(prompts, dtype=np.int64)
    logits, kv = model.infer_prefill(ids)
    pos = np.full(B, ids.shape[1], dtype=np.int64)
    outs = [[] for _ in range(B)]
    done = np.zeros(B, bool)
    for _ in range(max_len):
        toks = logits.argmax(axis=1)
        for b in range(B):
            if not done[b]:
                outs[b].append(int(toks[b]))
                if toks[b] == V.END:
                    done[b] = True
        if done.all():
            break
        logits = model.infer_step(kv, toks.astype(np.int64), pos)
        pos += 1
    return outs, [not d for d in done]


@dataclass
class RestartResult:
    solved: bool
    guess_count: int
    assignment: Optional[dict]
    failure: Optional[str] = None     # max_restarts | no_guess_node | max_len


def decode_restart(model, prompt, vocab, adapter, instance, seed: int = 0,
                   max_restarts: int = 256, max_len: int = 512,
                   scratchpad_len: Optional[int] = None) -> RestartResult:
    """Sample-and-restart decoding for depth-1 models.

    One attempt: greedy-decode rule moves; when the model emits the guess
    node (level token after r), append the scratchpad thinking tokens, run a
    single forward pass with the window mask, sample a guess from the
    guess-node output, drop the scratchpad, and resume greedy decoding. An
    attempt succeeds when it reaches the end token and the replayed
    assignment verifies; anything else triggers a restart.
    """
    from .transcripts import replay

    rng = make_rng(seed, 31)
    m2 = scratchpad_len if scratchpad_len is not None else model.config.scratchpad_len
    guesses = 0
    for _ in range(max_restarts):
        ids = list(prompt)
        hit_max = False
        guessed = False
        while len(ids) < max_len:
            logits = model.forward_infer(np.array([ids], dtype=np.int64))[0, -1]
            tok = int(np.argmax(logits))
            if V.is_level_token(tok) and not guessed:
                # guess node: attach the scratchpad and read its output
                gp = len(ids)
                ext = ids + [tok] + [V.PAD] * m2
                pos = list(range(len(ids) + 1)) + list(range(1, m2 + 1))
                mask = scratchpad_mask(len(ext), gp, m2)
                out = model.forward_infer(np.array([ext], dtype=np.int64),
                                          mask, np.array([pos]))[0, gp]
                z = out - out.max()
                p = np.exp(z)
                p /= p.sum()
                guess = int(rng.choice(len(p), p=p))
                guesses += 1
                ids.append(tok)
                ids.append(guess)
                guessed = True
                continue
            ids.append(tok)
            if tok == V.END:
                break
        else:
            hit_max = True
        if not hit_max and ids and ids[-1] == V.END:
            assignment = replay([t for t in ids if vocab.is_action(t)], vocab)
            state = adapter.initial_solution(instance)
            ok = _verify(adapter, instance, assignment)
            if ok:
                return RestartResult(True, guesses, assignment)
        if guesses >= max_restarts:
            break
        if not guessed and not hit_max:
            # the model never opened a guess node and still failed
            return RestartResult(False, guesses, None, "no_guess_node")
    return RestartResult(False, guesses, None, "max_restarts")


def _verify(adapter, instance, assignment) -> bool:
    from .transcripts import SudokuAdapter
    if isinstance(adapter, SudokuAdapter):
        from .board import Board
        sol = instance.solution
        return all(assignment.get((r, c)) == sol.get(r, c)
                   for r in range(1, sol.m + 1) for c in range(1, sol.m + 1))
    from .sat import check_solution
    full = [assignment.get(v, None) for v in range(1, adapter.nvars + 1)]
    if any(b is None for b in full):
        return False
    return check_solution(instance, full)
