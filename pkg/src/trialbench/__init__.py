"""trialbench: a workbench for trial-and-error combinatorial reasoning.

Uniform Sudoku and 1-in-3 SAT generators, DFS search transcripts with
multi-target labels, a small autoregressive model with custom losses and a
scratchpad attention window, plus min-sum set cover theory checks and
model-free guessing baselines.
"""

__version__ = "0.1.0"
