"""Token vocabulary for search transcripts.

Fixed special ids, guess-level ids for levels 1..99, then action ids:

* Sudoku: action id = ACTION_BASE + ((r-1)*m + (c-1))*m + (v-1); the text
  form is the concatenated digits r, c, v (e.g. "111" .. "999" for m=9).
* 1-in-3 SAT: literal id = ACTION_BASE + (var-1)*2 + (0 if positive else 1);
  the text form is the signed integer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .board import Move

PAD = 0
START = 1      # s
RULES_END = 2  # r
END = 3        # e
DEAD_END = 4   # d
LEVEL_BASE = 5
MAX_LEVEL = 99
ACTION_BASE = 104

_SPECIAL_TEXT = {PAD: "<pad>", START: "s", RULES_END: "r", END: "e", DEAD_END: "d"}


class VocabError(ValueError):
    pass


def level_token(level: int) -> int:
    if not 1 <= level <= MAX_LEVEL:
        raise VocabError(f"guess level {level} out of range 1..{MAX_LEVEL}")
    return LEVEL_BASE + level - 1


def is_level_token(tok: int) -> bool:
    return LEVEL_BASE <= tok < LEVEL_BASE + MAX_LEVEL


def level_of(tok: int) -> int:
    if not is_level_token(tok):
        raise VocabError(f"token {tok} is not a guess level")
    return tok - LEVEL_BASE + 1


@dataclass(frozen=True)
class Vocab:
    """Token space for one problem family."""

    kind: str     # "sudoku" or "onein3"
    param: int    # block order n, or variable count N

    def __post_init__(self):
        if self.kind not in ("sudoku", "onein3"):
            raise VocabError(f"unknown problem kind {self.kind!r}")

    @property
    def size(self) -> int:
        if self.kind == "sudoku":
            m = self.param * self.param
            return ACTION_BASE + m ** 3
        return ACTION_BASE + 2 * self.param

    def is_action(self, tok: int) -> bool:
        return ACTION_BASE <= tok < self.size

    # -- sudoku moves --------------------------------------------------------

    def encode_move(self, move: Move) -> int:
        m = self.param * self.param
        if not (1 <= move.r <= m and 1 <= move.c <= m and 1 <= move.v <= m):
            raise VocabError(f"move {move} out of range for m={m}")
        return ACTION_BASE + ((move.r - 1) * m + (move.c - 1)) * m + (move.v - 1)

    def decode_move(self, tok: int) -> Move:
        m = self.param * self.param
        if not self.is_action(tok):
            raise VocabError(f"token {tok} is not an action id")
        x = tok - ACTION_BASE
        rc, v = divmod(x, m)
        r, c = divmod(rc, m)
        return Move(r + 1, c + 1, v + 1)

    # -- SAT literals ---------------------------------------------------------

    def encode_literal(self, lit: int) -> int:
        var = abs(lit)
        if lit == 0 or var > self.param:
            raise VocabError(f"literal {lit} out of range for N={self.param}")
        return ACTION_BASE + (var - 1) * 2 + (0 if lit > 0 else 1)

    def decode_literal(self, tok: int) -> int:
        if not self.is_action(tok):
            raise VocabError(f"token {tok} is not an action id")
        var, neg = divmod(tok - ACTION_BASE, 2)
        return -(var + 1) if neg else var + 1

    # -- debugging text -------------------------------------------------------

    def token_text(self, tok: int) -> str:
        if tok in _SPECIAL_TEXT:
            return _SPECIAL_TEXT[tok]
        if is_level_token(tok):
            return f"L{level_of(tok)}"
        if self.is_action(tok):
            if self.kind == "sudoku":
                mv = self.decode_move(tok)
                return f"{mv.r}{mv.c}{mv.v}"
            return str(self.decode_literal(tok))
        raise VocabError(f"token {tok} outside vocabulary")

    def render(self, tokens) -> str:
        return " ".join(self.token_text(t) for t in tokens)
