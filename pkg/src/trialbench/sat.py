"""1-in-3 SAT: instance generation with a planted assignment, the three
inference rules with literal-equivalence tracking, and solution checking.

A literal is a signed nonzero int: +v / -v for variable v in 1..N. An
assignment satisfies an instance when every clause has exactly one true
literal. Generated instances are guaranteed satisfiable (the planted
assignment works) but not guaranteed unique, so checks always evaluate the
exactly-one condition rather than comparing to the planted assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .rng import make_rng


@dataclass(frozen=True)
class SatInstance:
    nvars: int
    clauses: tuple              # M triples of literals, distinct variables
    planted: tuple              # hidden satisfying assignment (bools), tests only

    @property
    def nclauses(self) -> int:
        return len(self.clauses)


class ParityUnionFind:
    """Union-find over variables with parity bits: a recorded relation says
    two variables are equal (parity 0) or opposite (parity 1)."""

    def __init__(self, nvars: int):
        self.parent = list(range(nvars + 1))
        self.parity = [0] * (nvars + 1)
        self.rank = [0] * (nvars + 1)
        self.contradiction = False

    def find(self, v: int):
        """(root, parity of v relative to root)."""
        path = []
        while self.parent[v] != v:
            path.append(v)
            v = self.parent[v]
        p = 0
        for u in reversed(path):
            p ^= self.parity[u]
            self.parity[u] = p
            self.parent[u] = v
        return v, self.parity[path[0]] if path else 0

    def relation(self, a: int, b: int) -> Optional[int]:
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        if ra != rb:
            return None
        return pa ^ pb

    def union(self, a: int, b: int, par: int) -> bool:
        """Record value(a) = value(b) xor par; False on x ≡ ¬x."""
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        if ra == rb:
            if pa ^ pb != par:
                self.contradiction = True
                return False
            return True
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
            pa, pb = pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ par
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def copy(self) -> "ParityUnionFind":
        out = ParityUnionFind(0)
        out.parent = list(self.parent)
        out.parity = list(self.parity)
        out.rank = list(self.rank)
        out.contradiction = self.contradiction
        return out


@dataclass
class SatState:
    """Tri-state assignment plus recorded literal equivalences and a trail
    of (literal, rule name) justifications."""

    nvars: int
    values: list = field(default_factory=list)   # 0 unknown, +1 true, -1 false
    equiv: ParityUnionFind = None
    trail: list = field(default_factory=list)

    def __post_init__(self):
        if not self.values:
            self.values = [0] * (self.nvars + 1)
        if self.equiv is None:
            self.equiv = ParityUnionFind(self.nvars)

    def copy(self) -> "SatState":
        return SatState(self.nvars, list(self.values), self.equiv.copy(),
                        list(self.trail))

    def literal_value(self, lit: int) -> int:
        v = self.values[abs(lit)]
        return v if lit > 0 else -v

    def assign(self, lit: int, reason: str = "assign"):
        var = abs(lit)
        val = 1 if lit > 0 else -1
        if self.values[var] == 0:
            self.values[var] = val
            self.trail.append((lit, reason))
        elif self.values[var] != val:
            raise ValueError(f"assignment {lit} contradicts current state")

    def assigned_count(self) -> int:
        return sum(1 for v in self.values[1:] if v != 0)

    def is_total(self) -> bool:
        return all(v != 0 for v in self.values[1:])


@dataclass(frozen=True)
class SatConflict:
    kind: str                   # two_true | all_false | equiv_contradiction
    clause_index: int = -1


def generate_instance(nvars: int, nclauses: int, seed: int, stream: int = 0) -> SatInstance:
    """Plant a uniform assignment, then keep random 3-literal clauses on
    distinct variables only when the planted assignment satisfies exactly
    one literal."""
    if nvars < 3:
        raise ValueError("need at least 3 variables")
    rng = make_rng(seed, stream, 2)
    planted = tuple(bool(b) for b in rng.integers(0, 2, size=nvars))
    clauses = []
    while len(clauses) < nclauses:
        vs = rng.choice(nvars, size=3, replace=False) + 1
        signs = rng.integers(0, 2, size=3)
        clause = tuple(int(v) if s else -int(v) for v, s in zip(vs, signs))
        sat = sum(1 for lit in clause
                  if planted[abs(lit) - 1] == (lit > 0))
        if sat == 1:
            clauses.append(clause)
    return SatInstance(nvars, tuple(clauses), planted)


def check_solution(instance: SatInstance, assignment) -> bool:
    """True iff every clause has exactly one true literal. The assignment
    must be total: either a bool sequence over variables 1..N or a mapping
    variable -> bool."""
    if isinstance(assignment, dict):
        if len(assignment) < instance.nvars:
            raise ValueError("partial assignment")
        values = [None] + [bool(assignment[v]) for v in range(1, instance.nvars + 1)]
    else:
        if len(assignment) != instance.nvars:
            raise ValueError("assignment length mismatch")
        values = [None] + [bool(b) for b in assignment]
    for clause in instance.clauses:
        sat = sum(1 for lit in clause if values[abs(lit)] == (lit > 0))
        if sat != 1:
            return False
    return True


def detect_conflict_sat(state: SatState, instance: SatInstance) -> Optional[SatConflict]:
    """Conflict iff a clause has two true literals, a clause has all three
    literals false, or the recorded equivalences force x ≡ ¬x (directly or
    through inconsistent known values in one class)."""
    if state.equiv.contradiction:
        return SatConflict("equiv_contradiction")
    for ci, clause in enumerate(instance.clauses):
        vals = [state.literal_value(lit) for lit in clause]
        if sum(1 for v in vals if v > 0) >= 2:
            return SatConflict("two_true", ci)
        if all(v < 0 for v in vals):
            return SatConflict("all_false", ci)
    root_val: dict = {}
    for v in range(1, state.nvars + 1):
        if state.values[v] == 0:
            continue
        r, p = state.equiv.find(v)
        implied = state.values[v] * (-1 if p else 1)
        if r in root_val and root_val[r] != implied:
            return SatConflict("equiv_contradiction")
        root_val[r] = implied
    return None


def _record_equivalences(state: SatState, instance: SatInstance):
    """Negative inference bookkeeping: a clause with a known-false literal
    forces its other two literals to differ."""
    for clause in instance.clauses:
        vals = [state.literal_value(lit) for lit in clause]
        for i in range(3):
            if vals[i] < 0:
                a, b = clause[(i + 1) % 3], clause[(i + 2) % 3]
                if abs(a) == abs(b):
                    continue  # handled by same-variable inference
                # val(a) != val(b); translate literal parity to variables
                par = 1 ^ (a < 0) ^ (b < 0)
                state.equiv.union(abs(a), abs(b), par)


def forced_moves_sat(state: SatState, instance: SatInstance) -> set:
    """Literals on currently-unknown variables forced by the three rules.

    Records any newly implied literal equivalences in the state as a side
    effect; the returned set is the union of positive inference,
    same-variable inference, and assignments propagated through recorded
    equivalence classes.
    """
    _record_equivalences(state, instance)
    out = set()
    for clause in instance.clauses:
        vals = [state.literal_value(lit) for lit in clause]
        # positive inference: a true literal forces the others negative
        for i in range(3):
            if vals[i] > 0:
                for j in (0, 1, 2):
                    if j != i and vals[j] == 0:
                        out.add(-clause[j])
        # same-variable inference
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(clause[i]) != abs(clause[j]):
                    continue
                k = 3 - i - j
                if clause[i] == -clause[j]:
                    # one of the pair is true regardless: third is false
                    if vals[k] == 0:
                        out.add(-clause[k])
                else:
                    # duplicated literal cannot be true twice
                    if vals[i] == 0:
                        out.add(-clause[i])
                    if vals[k] == 0:
                        out.add(clause[k])
    # propagate known values through equivalence classes
    root_val: dict = {}
    for v in range(1, state.nvars + 1):
        if state.values[v] != 0:
            r, p = state.equiv.find(v)
            root_val[r] = state.values[v] * (-1 if p else 1)
    for v in range(1, state.nvars + 1):
        if state.values[v] == 0:
            r, p = state.equiv.find(v)
            if r in root_val:
                val = root_val[r] * (-1 if p else 1)
                out.add(v if val > 0 else -v)
    return out


def propagate_sat(state: SatState, instance: SatInstance):
    """Apply forced literals to a fixpoint; returns (state, trace) where the
    trace lists applied literals in order. Stops at the first conflict,
    which is returned via detect_conflict_sat on the resulting state."""
    trace = []
    while True:
        if detect_conflict_sat(state, instance) is not None:
            return state, trace
        forced = forced_moves_sat(state, instance)
        forced = {l for l in forced if state.values[abs(l)] == 0}
        if not forced:
            return state, trace
        lit = min(forced, key=lambda l: (abs(l), l < 0))
        state.assign(lit, "forced")
        trace.append(lit)


# --- text format ------------------------------------------------------------

def write_instance(instance: SatInstance) -> str:
    lines = [f"p onein3 {instance.nvars} {instance.nclauses}"]
    for clause in instance.clauses:
        lines.append(" ".join(str(l) for l in clause))
    return "\n".join(lines) + "\n"


def read_instance(text: str) -> SatInstance:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 4 or head[0] != "p" or head[1] != "onein3":
        raise ValueError("bad header: expected 'p onein3 N M'")
    nvars, nclauses = int(head[2]), int(head[3])
    if len(lines) - 1 != nclauses:
        raise ValueError(f"expected {nclauses} clause lines, got {len(lines) - 1}")
    clauses = []
    for ln in lines[1:]:
        lits = tuple(int(x) for x in ln.split())
        if len(lits) != 3 or any(l == 0 or abs(l) > nvars for l in lits):
            raise ValueError(f"bad clause line {ln!r}")
        clauses.append(lits)
    return SatInstance(nvars, tuple(clauses), planted=())
