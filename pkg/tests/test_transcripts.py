import json

import pytest

from trialbench import vocab as V
from trialbench.board import Board, Move, propagate, solve_unique
from trialbench.sat import check_solution
from trialbench.transcripts import (
    BackdoorSet, NoBackdoor, SatAdapter, SudokuAdapter, Transcript,
    TranscriptFormatError, backdoors, generate_depth1_transcript,
    generate_dfs_transcript, parse_line, parse_lines, replay, replay_board,
    serialize,
)
from transcript_checks import validate_transcript


@pytest.fixture(scope="module")
def ad3():
    return SudokuAdapter(3)


@pytest.fixture(scope="module")
def ad2():
    return SudokuAdapter(2)


@pytest.fixture(scope="module")
def sat_ad():
    return SatAdapter(25, 15)


# --- vocabulary ---------------------------------------------------------------

def test_move_encoding_corners(ad3):
    assert ad3.vocab.encode_move(Move(1, 1, 1)) == 104
    assert ad3.vocab.token_text(104) == "111"
    assert ad3.vocab.encode_move(Move(9, 9, 9)) == 832
    assert ad3.vocab.token_text(832) == "999"


def test_move_encoding_bijection(ad3, ad2):
    for vocab, m in ((ad3.vocab, 9), (ad2.vocab, 4)):
        seen = set()
        for r in range(1, m + 1):
            for c in range(1, m + 1):
                for v in range(1, m + 1):
                    tok = vocab.encode_move(Move(r, c, v))
                    assert vocab.decode_move(tok) == Move(r, c, v)
                    seen.add(tok)
        assert len(seen) == m ** 3
        assert min(seen) == V.ACTION_BASE and max(seen) == vocab.size - 1


def test_literal_encoding(sat_ad):
    v = sat_ad.vocab
    assert v.encode_literal(1) == 104
    assert v.encode_literal(-1) == 105
    for lit in list(range(1, 26)) + [-k for k in range(1, 26)]:
        assert v.decode_literal(v.encode_literal(lit)) == lit
    assert v.token_text(v.encode_literal(-7)) == "-7"


def test_special_token_text(ad3):
    assert [ad3.vocab.token_text(t) for t in (1, 2, 3, 4)] == ["s", "r", "e", "d"]
    assert ad3.vocab.token_text(V.level_token(12)) == "L12"


# --- DFS transcripts -------------------------------------------------------------

def test_rules_only_puzzle_shape(ad3):
    for s in range(40):
        inst = ad3.generate_instance(seed=700 + s)
        tr = generate_dfs_transcript(ad3, inst, seed=s)
        if tr.meta["guesses"] == 0:
            assert V.RULES_END not in tr.tokens
            assert tr.tokens[-1] == V.END
            givens = ad3.problem_tokens(inst)
            assert tr.tokens[:len(givens) + 1] == givens + [V.START]
            return
    pytest.fail("no rules-only puzzle found")


def test_replay_matches_solver(ad3):
    for s in range(15):
        inst = ad3.generate_instance(seed=1700 + s)
        tr = generate_dfs_transcript(ad3, inst, seed=s)
        assert replay_board(tr.tokens, ad3.vocab).cells == solve_unique(inst.puzzle).cells


def test_dead_end_retries_same_cell(ad3):
    found = 0
    for s in range(120):
        inst = ad3.generate_instance(seed=2900 + s)
        tr = generate_dfs_transcript(ad3, inst, seed=s)
        toks = tr.tokens
        for i, t in enumerate(toks):
            if t != V.DEAD_END:
                continue
            lvl = toks[i + 1]
            assert V.is_level_token(lvl)
            retry = ad3.vocab.decode_move(toks[i + 2])
            # the refuted guess at that level: the action right after the
            # previous occurrence of this level token
            prev = max(j for j in range(i) if toks[j] == lvl)
            refuted = ad3.vocab.decode_move(toks[prev + 1])
            assert (retry.r, retry.c) == (refuted.r, refuted.c)
            assert retry.v != refuted.v
            found += 1
        if found >= 3:
            break
    assert found >= 3


def test_transcript_invariants_sudoku(ad3, ad2):
    for adapter, base in ((ad3, 3100), (ad2, 51)):
        for s in range(12):
            inst = adapter.generate_instance(seed=base + s)
            tr = generate_dfs_transcript(adapter, inst, seed=s)
            res = validate_transcript(tr, adapter, inst)
            assert res["final_state"].cells == solve_unique(inst.puzzle).cells


def test_sat_transcript_pattern(sat_ad):
    inst = sat_ad.generate_instance(seed=41)
    tr = generate_dfs_transcript(sat_ad, inst, seed=41)
    toks = tr.tokens
    s_pos = toks.index(V.START)
    assert s_pos == 45  # 15 clauses x 3 literal tokens
    assert toks[-1] == V.END
    # guess levels are announced after every rules-end
    for i, t in enumerate(toks[:-1]):
        if t == V.RULES_END and toks[i + 1] != V.END:
            assert V.is_level_token(toks[i + 1])
    validate_transcript(tr, sat_ad, inst)


def test_sat_replay_is_solution(sat_ad):
    for s in range(25):
        inst = sat_ad.generate_instance(seed=4100 + s)
        tr = generate_dfs_transcript(sat_ad, inst, seed=s)
        asg = replay(tr.tokens, sat_ad.vocab)
        full = [asg.get(v, False) for v in range(1, 26)]
        assert check_solution(inst, full)


def test_byte_determinism(ad3, sat_ad):
    inst = ad3.generate_instance(seed=77)
    a = serialize(generate_dfs_transcript(ad3, inst, seed=5))
    b = serialize(generate_dfs_transcript(ad3, inst, seed=5))
    assert a == b
    c = serialize(generate_dfs_transcript(ad3, inst, seed=6))
    assert a != c
    si = sat_ad.generate_instance(seed=9)
    assert (serialize(generate_dfs_transcript(sat_ad, si, seed=1))
            == serialize(generate_dfs_transcript(sat_ad, si, seed=1)))


# --- backdoors and depth-1 ---------------------------------------------------------

def test_backdoor_values_match_solution(ad3):
    for s in range(30):
        inst = ad3.generate_instance(seed=5200 + s)
        fix = propagate(inst.puzzle).board
        if fix.is_full():
            continue
        bs = backdoors(fix)
        sol = solve_unique(inst.puzzle)
        for tok in bs.tokens:
            mv = ad3.vocab.decode_move(tok)
            assert sol.get(mv.r, mv.c) == mv.v
        return
    pytest.fail("no guessing puzzle found")


def test_backdoors_4x4_manual_crosscheck(ad2):
    # carved 4x4 puzzles are always rules-complete, so build a two-solution
    # board by blanking an unavoidable rectangle: cells (1,1),(1,2),(3,1),
    # (3,2) of 1234/3412/2143/4321 swap 1<->2 between its two completions
    full = Board.from_single_line("1234341221434321", n=2)
    fix = full.clear(1, 1).clear(1, 2).clear(3, 1).clear(3, 2)
    assert propagate(fix).trace == []  # already a fixpoint
    bs = backdoors(fix)
    manual = set()
    from trialbench.board import candidates
    grid = candidates(fix)
    for r in range(1, 5):
        for c in range(1, 5):
            if fix.get(r, c):
                continue
            for v in grid.candidates_of(r, c):
                res = propagate(fix.place(Move(r, c, v)))
                if res.conflict is None and res.board.is_full():
                    manual.add(ad2.vocab.encode_move(Move(r, c, v)))
    assert bs.tokens == frozenset(manual)
    # both branch values of each rectangle cell complete by rules
    assert len(bs.tokens) == 8


def test_backdoors_requires_fixpoint(ad3):
    inst = ad3.generate_instance(seed=1)
    if propagate(inst.puzzle).trace:
        with pytest.raises(Exception):
            backdoors(inst.puzzle)


def test_depth1_rejects_rules_only(ad3):
    for s in range(60):
        inst = ad3.generate_instance(seed=7000 + s)
        if propagate(inst.puzzle).board.is_full():
            with pytest.raises(NoBackdoor):
                generate_depth1_transcript(ad3, inst, seed=s)
            return
    pytest.fail("no rules-only puzzle found")


def test_depth1_structure_and_replay(ad3):
    made = 0
    for s in range(60):
        inst = ad3.generate_instance(seed=7100 + s)
        try:
            tr = generate_depth1_transcript(ad3, inst, seed=s)
        except NoBackdoor:
            continue
        gp = tr.meta["guess_pos"]
        assert tr.tokens[gp] == V.level_token(1)
        assert tr.tokens[gp - 1] == V.RULES_END
        assert tuple(tr.meta["backdoors"]) == tr.target_sets[gp]
        assert tr.tokens[gp + 1] in tr.target_sets[gp]
        assert len(tr.meta["scratchpad_targets"]) == 81
        assert replay_board(tr.tokens, ad3.vocab).cells == solve_unique(inst.puzzle).cells
        # every member of the guess target set is individually a backdoor
        fix = propagate(inst.puzzle).board
        for tok in tr.target_sets[gp]:
            mv = ad3.vocab.decode_move(tok)
            res = propagate(fix.place(mv))
            assert res.conflict is None and res.board.is_full()
        made += 1
        if made >= 3:
            return
    pytest.fail("not enough depth-1 instances found")


# --- replay --------------------------------------------------------------------

def test_replay_last_write_wins(ad3):
    v = ad3.vocab
    toks = [v.encode_move(Move(2, 3, 5)), V.START, v.encode_move(Move(2, 3, 7))]
    assert replay(toks, v)[(2, 3)] == 7


def test_replay_empty(ad3):
    assert replay([V.START, V.END], ad3.vocab) == {}


def test_replay_rejects_garbage(ad3):
    with pytest.raises(Exception):
        replay([104, 4242], ad3.vocab)


# --- serialization ----------------------------------------------------------------

def test_serialize_roundtrip_many(ad2, sat_ad):
    for s in range(25):
        inst = ad2.generate_instance(seed=8000 + s)
        tr = generate_dfs_transcript(ad2, inst, seed=s)
        assert parse_line(serialize(tr)) == tr
    inst = sat_ad.generate_instance(seed=3)
    tr = generate_dfs_transcript(sat_ad, inst, seed=3)
    assert parse_line(serialize(tr)) == tr


def test_parse_reports_line_numbers(ad2):
    inst = ad2.generate_instance(seed=1)
    good = serialize(generate_dfs_transcript(ad2, inst, seed=1))
    lines = [good, "{corrupted", good]
    with pytest.raises(TranscriptFormatError) as err:
        list(parse_lines(lines))
    assert "line 2" in str(err.value)


def test_parse_rejects_unknown_fields():
    rec = {"v": 1, "tokens": [1], "targets": [[]], "mask": [0],
           "meta": {}, "surprise": 1}
    with pytest.raises(TranscriptFormatError) as err:
        parse_line(json.dumps(rec))
    assert "unknown fields" in str(err.value) and "version" in str(err.value)


def test_parse_rejects_other_versions():
    rec = {"v": 99, "tokens": [], "targets": [], "mask": [], "meta": {}}
    with pytest.raises(TranscriptFormatError) as err:
        parse_line(json.dumps(rec))
    assert "version" in str(err.value)
