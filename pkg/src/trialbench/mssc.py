"""Min-sum set cover: searching for a valid choice as early as possible.

A scenario distribution D assigns probability to subsets S of the n choices;
probing choices one per time step, the cost of a policy is the expected time
until a probed choice lands in S. Permutation policies probe a fixed order;
non-adaptive policies resample a fixed distribution pi independently every
step, with expected time E[1 / pi(S)].

Everything evaluated on explicit supports uses exact rational arithmetic;
only the square-root construction and gradient-trained policies live in
floats (their costs are still evaluated exactly from the float entries).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .rng import make_rng


class MsscError(ValueError):
    pass


class ZeroCoverProbability(MsscError):
    pass


class OptimizerDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class MsscDistribution:
    """Explicit distribution over nonempty subsets of choices 1..n."""

    n: int
    support: tuple   # ((frozenset, Fraction), ...)

    def __post_init__(self):
        total = Fraction(0)
        for s, p in self.support:
            if not s:
                raise MsscError("support sets must be nonempty")
            if not all(1 <= i <= self.n for i in s):
                raise MsscError(f"set {sorted(s)} out of range 1..{self.n}")
            if p <= 0:
                raise MsscError("probabilities must be positive")
            total += p
        if total != 1:
            raise MsscError(f"probabilities sum to {total}, not 1")

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "MsscDistribution":
        return cls(n, tuple((frozenset(s), Fraction(p)) for s, p in pairs))


def example_marginals(n: int) -> MsscDistribution:
    """Two scenarios: everything but the last choice with probability 2/3,
    the last choice alone with probability 1/3. Ordering by marginals alone
    explores the singleton last and pays ~n/3; the optimal permutation pays
    4/3 by probing one bulk element and then the singleton."""
    if n < 2:
        raise MsscError("need n >= 2")
    return MsscDistribution.from_pairs(
        n, [(frozenset(range(1, n)), Fraction(2, 3)),
            (frozenset([n]), Fraction(1, 3))])


def random_distribution(n: int, max_sets: int, rng: np.random.Generator) -> MsscDistribution:
    """Random explicit instance with exact rational probabilities."""
    k = int(rng.integers(1, min(max_sets, (1 << n) - 1) + 1))
    sets = set()
    while len(sets) < k:
        mask = int(rng.integers(1, 1 << n))
        sets.add(frozenset(i + 1 for i in range(n) if mask >> i & 1))
    weights = [int(w) for w in rng.integers(1, 20, size=len(sets))]
    z = sum(weights)
    return MsscDistribution.from_pairs(
        n, [(s, Fraction(w, z)) for s, w in zip(sorted(sets, key=sorted), weights)])


# ---------------------------------------------------------------------------
# exact policy costs


def cost_permutation(tau: Sequence[int], dist: MsscDistribution) -> Fraction:
    """Expected index (1-based) of the first probe that lands in S."""
    if sorted(tau) != list(range(1, dist.n + 1)):
        raise MsscError(f"{tau} is not a permutation of 1..{dist.n}")
    cost = Fraction(0)
    for s, p in dist.support:
        t = next(i for i, choice in enumerate(tau, start=1) if choice in s)
        cost += p * t
    return cost


def cost_nonadaptive(pi, dist: MsscDistribution) -> Fraction:
    """Exact E[1 / pi(S)]; pi entries are taken exactly (floats included)."""
    pi = [Fraction(x) for x in pi]
    if len(pi) != dist.n:
        raise MsscError("policy length mismatch")
    if any(x < 0 for x in pi):
        raise MsscError("policy entries must be non-negative")
    cost = Fraction(0)
    for s, p in dist.support:
        mass = sum((pi[i - 1] for i in s), Fraction(0))
        if mass == 0:
            raise ZeroCoverProbability(f"pi({sorted(s)}) = 0")
        cost += p / mass
    return cost


def brute_force_permutation(dist: MsscDistribution):
    """Exact minimum over all n! permutations (subset dynamic program:
    ordering a probed prefix set does not change which scenarios remain
    uncovered, so min prefix cost only depends on the set)."""
    n = dist.n
    if n > 10:
        raise MsscError("brute force capped at n = 10")
    sets = [s for s, _ in dist.support]
    weights = [p for _, p in dist.support]
    covers = [0] * (n + 1)
    for j, s in enumerate(sets):
        for i in s:
            covers[i] |= 1 << j
    full_sets = (1 << len(sets)) - 1

    def uncovered_weight(probed_mask):
        w = Fraction(0)
        for j, s in enumerate(sets):
            if all(not (probed_mask >> (i - 1)) & 1 for i in s):
                w += weights[j]
        return w

    size = 1 << n
    best = [None] * size
    back = [0] * size
    best[0] = Fraction(0)
    masks_by_pop = sorted(range(size), key=lambda m: bin(m).count("1"))
    wcache = [uncovered_weight(m) for m in range(size)]
    for mask in masks_by_pop:
        if mask == 0:
            continue
        b = None
        arg = 0
        for i in range(1, n + 1):
            bit = 1 << (i - 1)
            if mask & bit:
                prev = mask ^ bit
                cand = best[prev] + wcache[prev]
                if b is None or cand < b:
                    b = cand
                    arg = i
        best[mask] = b
        back[mask] = arg
    tau = []
    mask = size - 1
    while mask:
        i = back[mask]
        tau.append(i)
        mask ^= 1 << (i - 1)
    tau.reverse()
    cost = best[size - 1]
    assert cost == cost_permutation(tau, dist)
    return tuple(tau), cost


def brute_force_permutation_enumerated(dist: MsscDistribution):
    """Literal n! enumeration; test oracle for the subset DP."""
    best = None
    best_tau = None
    for tau in itertools.permutations(range(1, dist.n + 1)):
        c = cost_permutation(tau, dist)
        if best is None or c < best:
            best, best_tau = c, tau
    return best_tau, best


def greedy_adaptive(dist: MsscDistribution):
    """Probe the most likely choice conditional on the scenario not being
    covered yet, ties to the lowest index. Because the only feedback is
    success (stop) or failure, the decision tree collapses to a single probe
    sequence; returns (sequence, exact cost)."""
    n = dist.n
    remaining = list(dist.support)
    order = []
    cost = Fraction(0)
    probed = set()
    step = 1
    while remaining:
        z = sum((p for _, p in remaining), Fraction(0))
        best_i = None
        best_mass = Fraction(-1)
        for i in range(1, n + 1):
            if i in probed:
                continue
            mass = sum((p for s, p in remaining if i in s), Fraction(0))
            if mass > best_mass:
                best_mass = mass
                best_i = i
        order.append(best_i)
        probed.add(best_i)
        cost += step * best_mass
        remaining = [(s, p) for s, p in remaining if best_i not in s]
        step += 1
    return tuple(order), cost


# ---------------------------------------------------------------------------
# non-adaptive constructions


def q_profile(tau: Sequence[int], dist: MsscDistribution):
    """q[i] = probability the scenario is covered at exactly probe i+1."""
    q = [Fraction(0)] * dist.n
    for s, p in dist.support:
        t = next(i for i, choice in enumerate(tau, start=1) if choice in s)
        q[t - 1] += p
    return q


def sqrt_q_policy(tau: Sequence[int], dist: MsscDistribution) -> np.ndarray:
    """pi[tau_i] proportional to sqrt(q_i); the classic construction whose
    non-adaptive cost is within H_n of the permutation's cost."""
    q = q_profile(tau, dist)
    if all(x == 0 for x in q):
        raise MsscError("degenerate all-zero coverage profile")
    roots = np.sqrt(np.array([float(x) for x in q]))
    z = roots.sum()
    pi = np.zeros(dist.n)
    for i, choice in enumerate(tau):
        pi[choice - 1] = roots[i] / z
    return pi


def harmonic(n: int) -> Fraction:
    return sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, len(v) + 1) > 0)[0][-1]
    lam = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


def optimize_nonadaptive(dist: MsscDistribution, iterations: int = 3000,
                         step: float = 0.1, seed: int = 0,
                         cost_check_every: int = 1):
    """Projected gradient descent on E[1 / pi(S)] over the simplex.

    The objective is convex; gradient component i is -E[1{i in S}/pi(S)^2].
    Returns (pi, exact cost) for the best iterate by exact cost, evaluated
    every ``cost_check_every`` iterations (the exact rationals dominate the
    runtime on large sweeps).
    """
    n = dist.n
    sets = [np.array([i - 1 for i in sorted(s)]) for s, _ in dist.support]
    probs = np.array([float(p) for _, p in dist.support])
    pi = np.full(n, 1.0 / n)
    best_pi = pi.copy()
    best_cost = cost_nonadaptive(pi, dist)
    mix = 1e-6  # keep iterates interior so 1/pi(S)^2 stays finite
    for it in range(iterations):
        grad = np.zeros(n)
        for idx, p in zip(sets, probs):
            mass = pi[idx].sum()
            grad[idx] -= p / (mass * mass)
        if not np.all(np.isfinite(grad)):
            raise OptimizerDiverged(f"non-finite gradient at iteration {it}; "
                                    f"step {step} too large")
        pi = project_simplex(pi - step * grad)
        pi = (1 - mix) * pi + mix / n
        if (it + 1) % cost_check_every and it + 1 != iterations:
            continue
        c = cost_nonadaptive(pi, dist)
        if c < best_cost:
            best_cost = c
            best_pi = pi.copy()
    return best_pi, best_cost


# ---------------------------------------------------------------------------
# contextual policies


class LossKind(enum.Enum):
    LOG_L1 = "log_l1"            # -log pi(S): expected-trials surrogate
    WEIGHTED_CE = "weighted_ce"  # alpha * sum_{i in S} -log pi_i


@dataclass
class ContextualPolicy:
    """Linear map from context features to choice scores, softmax'd at
    temperature 1 into a distribution over choices."""

    weights: np.ndarray          # (n, d)

    def scores(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x

    def probs(self, x: np.ndarray) -> np.ndarray:
        z = self.scores(x)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()


def train_contextual(dataset, n: int, d: int, loss: LossKind,
                     epochs: int = 30, lr: float = 0.5, seed: int = 0,
                     batch: int = 32, alpha: float = 1.0) -> ContextualPolicy:
    """SGD on (context, S) pairs; S is a set of 1-based valid choices."""
    rng = make_rng(seed, 11)
    xs = np.stack([np.asarray(x, dtype=float) for x, _ in dataset])
    sets = [np.array(sorted(i - 1 for i in s)) for _, s in dataset]
    w = np.zeros((n, d))
    nex = len(dataset)
    for _ in range(epochs):
        order = rng.permutation(nex)
        for start in range(0, nex, batch):
            idxs = order[start:start + batch]
            grad = np.zeros_like(w)
            for j in idxs:
                x = xs[j]
                s = sets[j]
                z = w @ x
                z = z - z.max()
                e = np.exp(z)
                pi = e / e.sum()
                if loss is LossKind.LOG_L1:
                    in_s = np.zeros(n)
                    in_s[s] = e[s] / e[s].sum()
                    dz = pi - in_s
                else:
                    dz = alpha * (len(s) * pi - np.isin(np.arange(n), s).astype(float))
                grad += np.outer(dz, x)
            w -= lr * grad / max(1, len(idxs))
    return ContextualPolicy(w)


def expected_guesses(policy: ContextualPolicy, dataset) -> float:
    """Exact mean of 1/pi(S) over the dataset (expected trials per example)."""
    total = 0.0
    for x, s in dataset:
        pi = policy.probs(np.asarray(x, dtype=float))
        mass = pi[[i - 1 for i in s]].sum()
        if mass <= 0:
            return float("inf")
        total += 1.0 / mass
    return total / len(dataset)


def simulate_guesses(policy: ContextualPolicy, dataset, seed: int = 0,
                     cap: int = 10 ** 6) -> list:
    """Per-example trial counts: sample choices i.i.d. from pi(x) until one
    lands in S."""
    rng = make_rng(seed, 12)
    counts = []
    for x, s in dataset:
        pi = policy.probs(np.asarray(x, dtype=float))
        hit = set(i - 1 for i in s)
        for t in range(1, cap + 1):
            if int(rng.choice(len(pi), p=pi)) in hit:
                counts.append(t)
                break
        else:
            counts.append(cap)
    return counts


# ---------------------------------------------------------------------------
# instance files


def write_distribution(dist: MsscDistribution) -> str:
    lines = [f"mssc {dist.n} {len(dist.support)}"]
    for s, p in dist.support:
        lines.append(f"{p}; {' '.join(str(i) for i in sorted(s))}")
    return "\n".join(lines) + "\n"


def read_distribution(text: str) -> MsscDistribution:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 3 or head[0] != "mssc":
        raise MsscError("bad header: expected 'mssc n k'")
    n, k = int(head[1]), int(head[2])
    if len(lines) - 1 != k:
        raise MsscError(f"expected {k} support lines, got {len(lines) - 1}")
    pairs = []
    for ln in lines[1:]:
        if ";" not in ln:
            raise MsscError(f"bad support line {ln!r}")
        p_str, items = ln.split(";", 1)
        pairs.append((frozenset(int(x) for x in items.split()), Fraction(p_str.strip())))
    return MsscDistribution.from_pairs(n, pairs)
