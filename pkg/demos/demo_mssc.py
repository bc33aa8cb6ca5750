#!/usr/bin/env python3
"""Min-sum set cover: exact costs, the greedy baseline, the square-root
construction, convex optimization over the simplex, and the contextual
loss comparison that separates the expected-trials loss from weighted
cross-entropy."""

from fractions import Fraction

from trialbench.mssc import (
    brute_force_permutation, cost_nonadaptive, cost_permutation,
    example_marginals, greedy_adaptive, harmonic, optimize_nonadaptive,
    sqrt_q_policy,
)
from trialbench.experiments import contextual_loss_comparison

print("== the two-scenario example (bulk 2/3, singleton 1/3) ==")
n = 6
d = example_marginals(n)
tau_opt, opt = brute_force_permutation(d)
print("optimal permutation:", tau_opt, "cost:", opt)
print("marginal order cost:", cost_permutation(tuple(range(1, n + 1)), d),
      f"(= 2/3 + {n}/3)")
order, gcost = greedy_adaptive(d)
print("greedy probe order:", order, "cost:", gcost)

print("\n== non-adaptive policies ==")
pi_sq = sqrt_q_policy(tau_opt, d)
print("sqrt-q policy:", [round(float(x), 4) for x in pi_sq])
print("its exact cost:", float(cost_nonadaptive(pi_sq, d)))
pi, cost = optimize_nonadaptive(d, iterations=2000, step=0.05)
print("optimized policy:", [round(float(x), 4) for x in pi])
print("optimized cost:", float(cost), "| H_n * opt =", float(harmonic(n) * opt))

print("\n== contextual comparison (n=20 family) ==")
cmp = contextual_loss_comparison(n=20, seed=3)
print(f"mean simulated guesses: expected-trials loss {cmp.mean_guesses_l1:.2f}"
      f" vs weighted cross-entropy {cmp.mean_guesses_ce:.2f}")
print(f"exact expected trials:  {cmp.expected_l1:.2f} vs {cmp.expected_ce:.2f}")
