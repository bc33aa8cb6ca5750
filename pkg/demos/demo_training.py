#!/usr/bin/env python3
"""Train a small decoder-only model on streaming 4x4 transcripts, watch
held-out board accuracy, then run the sample-and-restart decoder with the
scratchpad window on a stub guess distribution.

The full training run takes a few minutes; pass --quick for a short smoke
pass that just shows the loop working.
"""

import sys

import numpy as np

from trialbench import vocab as V
from trialbench.board import propagate
from trialbench.decoding import decode_greedy, decode_restart
from trialbench.experiments import (
    eval_board_accuracy, train_board_accuracy, transcript_stream,
)
from trialbench.generator import generate
from trialbench.transcripts import SudokuAdapter, backdoors

quick = "--quick" in sys.argv

print("== streaming training on 4x4 transcripts ==")
steps = 800 if quick else 12000
run = train_board_accuracy(seed=7, steps=steps, lr_peak=3e-3, layers=2,
                           heads=4, embed_dim=48, eval_every=400,
                           eval_count=100)
print("held-out board accuracy over training:")
for step, acc in run.history:
    print(f"  step {step:5d}: {acc:.3f}")
print(f"parameters: {run.result.model.param_count():,} | "
      f"CPU minutes: {run.cpu_minutes:.1f} | reached 90%: {run.reached}")

model = run.result.model
ad = SudokuAdapter(2)
pair = next(generate(2, 1, seed=31_000_000))
prompt = ad.problem_tokens(pair) + [V.START]
out, _ = decode_greedy(model, prompt, max_len=60)
print("\ngreedy decode of one held-out puzzle:")
print("  ", ad.vocab.render(out))
print("   solution:", pair.solution.to_single_line())
