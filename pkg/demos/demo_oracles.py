#!/usr/bin/env python3
"""Model-free guessing statistics: the backdoor census (how often one guess
suffices) and the upper/lower oracle reference curves."""

from trialbench.evalbench import backdoor_census, oracle_median_run

print("== backdoor census (2,000 carved puzzles) ==")
rep = backdoor_census(2000, seed=1234)
print(f"rules-complete:      {rep.rules_complete}")
print(f"one-guess-solvable:  {rep.one_guess}")
print(f"neither:             {rep.neither}")
print(f"covered fraction:    {rep.covered_fraction:.4f}  (published value: 0.998)")

print("\n== oracle reference curves (1,000 puzzles needing a guess) ==")
orc = oracle_median_run(1000, seed=99)
print(f"upper oracle: median expected guesses {orc.upper_expected_median:.2f} "
      f"(published 2.3); simulated single-run median {orc.upper_hist.median:.2f}")
print(f"lower oracle: median expected guesses {orc.lower_expected_median:.2f}; "
      f"simulated {orc.lower_hist.median:.2f}")
print("\ncumulative curve head (upper oracle):")
for k, f in orc.upper_hist.cumulative[:8]:
    print(f"  <= {k} guesses: {f * 100:5.1f}%")
