#!/usr/bin/env python3
"""DFS search transcripts with multi-target labels.

Shows a full trial-and-error transcript for Sudoku (rule moves, guess
levels, dead ends, backtracking) and for 1-in-3 SAT, plus a depth-1
transcript whose guess node is labeled with the complete backdoor set.
"""

from trialbench import vocab as V
from trialbench.board import propagate, solve_unique
from trialbench.transcripts import (
    NoBackdoor, SatAdapter, SudokuAdapter, backdoors, generate_depth1_transcript,
    generate_dfs_transcript, replay_board, serialize,
)

print("== a Sudoku transcript that needs guessing ==")
ad = SudokuAdapter(3)
for s in range(200):
    inst = ad.generate_instance(seed=5000 + s)
    tr = generate_dfs_transcript(ad, inst, seed=s)
    if tr.meta["dead_ends"] >= 1:
        break
print("guesses:", tr.meta["guesses"], "dead ends:", tr.meta["dead_ends"],
      "max level:", tr.meta["max_level"], "tokens:", len(tr.tokens))
s_pos = tr.tokens.index(V.START)
print("after s:", ad.vocab.render(tr.tokens[s_pos:s_pos + 22]), "...")
print("replay equals the unique solution:",
      replay_board(tr.tokens, ad.vocab).cells == solve_unique(inst.puzzle).cells)
gp = next(i for i, t in enumerate(tr.tokens) if V.is_level_token(t))
print("multi-target set size at the first rule position:",
      len(tr.target_sets[s_pos]))

print("\n== 1-in-3 SAT transcript ==")
sat = SatAdapter(25, 15)
sinst = sat.generate_instance(seed=77)
st = generate_dfs_transcript(sat, sinst, seed=77)
print(sat.vocab.render(st.tokens[45:]))

print("\n== depth-1 transcript with its backdoor target set ==")
for s in range(200):
    inst = ad.generate_instance(seed=9000 + s)
    try:
        d1 = generate_depth1_transcript(ad, inst, seed=s)
        break
    except NoBackdoor:
        continue
gp = d1.meta["guess_pos"]
print("guess node at position", gp, "| backdoor set size:", len(d1.meta["backdoors"]))
print("backdoor moves:", [ad.vocab.token_text(t) for t in d1.meta["backdoors"]])
fix = propagate(inst.puzzle).board
print("recheck via the exhaustive scan:",
      backdoors(fix).tokens == frozenset(d1.meta["backdoors"]))
print("\nserialized line (first 120 chars):", serialize(d1)[:120], "...")
