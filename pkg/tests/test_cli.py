import json

import pytest

from trialbench.cli import detect_format, main
from trialbench.board import Board
from trialbench.sat import check_solution, generate_instance, read_instance


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_sudoku_deterministic(capsys):
    code, a, _ = run(capsys, "gen", "sudoku", "--n", "3", "--count", "2", "--seed", "7")
    assert code == 0
    code, b, _ = run(capsys, "gen", "sudoku", "--n", "3", "--count", "2", "--seed", "7")
    assert code == 0 and a == b
    lines = a.strip().splitlines()
    assert len(lines) == 2
    puzzle, solution = lines[0].split("\t")
    assert Board.from_single_line(solution).is_solved()
    from trialbench.board import solve_unique
    assert solve_unique(Board.from_single_line(puzzle)).to_single_line() == solution


def test_gen_sat_planted_solution(capsys):
    code, out, _ = run(capsys, "gen", "sat", "--vars", "25", "--clauses", "15",
                       "--seed", "1", "--count", "1")
    assert code == 0
    inst = read_instance(out)
    regen = generate_instance(25, 15, seed=1)
    assert inst.clauses == regen.clauses
    assert check_solution(regen, regen.planted)


def test_transcribe_output_parses(capsys):
    code, out, _ = run(capsys, "transcribe", "--problem", "sudoku", "--n", "2",
                       "--count", "3", "--seed", "5")
    assert code == 0
    from trialbench.transcripts import parse_lines
    trs = list(parse_lines(out.splitlines()))
    assert len(trs) == 3
    assert all(t.meta["solved"] for t in trs)


def test_eval_accepts_single_line_file(tmp_path, capsys):
    from trialbench.generator import generate
    from trialbench.model import Model, ModelConfig
    from trialbench.training import save_checkpoint
    from trialbench.vocab import Vocab
    puzzles = tmp_path / "puzzles.txt"
    pairs = list(generate(3, 2, seed=3))
    puzzles.write_text("".join(p.puzzle.to_single_line() + "\n" for p in pairs))
    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(Model(ModelConfig(vocab_size=Vocab("sudoku", 3).size,
                                      layers=1, heads=1, embed_dim=8,
                                      max_positions=512), seed=0), str(ckpt))
    code, out, _ = run(capsys, "eval", "--puzzles", str(puzzles),
                       "--checkpoint", str(ckpt), "--format", "single-line")
    assert code == 0
    assert "board_accuracy" in out and "rule_logic_accuracy" in out


def test_format_autodetection():
    assert detect_format("0" * 81) == "single-line"
    assert detect_format("0" * 16) == "single-line"
    grid = "\n".join(["000100000"] * 9)
    assert detect_format(grid) == "grid"
    trip = "110 120 133"
    assert detect_format(trip) == "triplets"


def test_eval_triplet_file(tmp_path, capsys):
    from trialbench.generator import generate
    from trialbench.model import Model, ModelConfig
    from trialbench.training import save_checkpoint
    from trialbench.vocab import Vocab
    pair = next(generate(3, 1, seed=9))
    puzzles = tmp_path / "p.txt"
    puzzles.write_text(pair.puzzle.to_triplets() + "\n")
    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(Model(ModelConfig(vocab_size=Vocab("sudoku", 3).size,
                                      layers=1, heads=1, embed_dim=8,
                                      max_positions=512), seed=0), str(ckpt))
    code, out, _ = run(capsys, "eval", "--puzzles", str(puzzles),
                       "--checkpoint", str(ckpt))
    assert code == 0


def test_dry_run_prints_config_only(capsys):
    code, out, err = run(capsys, "gen", "sudoku", "--n", "2", "--count", "5",
                         "--dry-run")
    assert code == 0
    assert out == ""
    assert "config" in err and '"count": 5' in err


def test_config_file_overlay(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("count=3\nn=2\n")
    code, out, _ = run(capsys, "gen", "sudoku", "--config", str(cfg), "--seed", "1")
    assert code == 0
    assert len(out.strip().splitlines()) == 3
    # explicit flag beats the file
    code, out, _ = run(capsys, "gen", "sudoku", "--config", str(cfg),
                       "--count", "1", "--seed", "1")
    assert len(out.strip().splitlines()) == 1


def test_unknown_flag_is_validation_error(capsys):
    assert main(["gen", "sudoku", "--bogus"]) == 1


def test_missing_input_file(capsys):
    assert main(["eval", "--puzzles", "/definitely/not/here"]) == 1


def test_runtime_failure_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint at all")
    puzzles = tmp_path / "p.txt"
    puzzles.write_text("0" * 81 + "\n")
    assert main(["eval", "--puzzles", str(puzzles), "--checkpoint", str(bad)]) == 2


def test_mssc_theory_csv(capsys):
    code, out, _ = run(capsys, "mssc", "--op", "theory-suite", "--instances", "5",
                       "--seed", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "instance,method,exact_cost"
    assert any(",greedy," in ln for ln in lines)


def test_bench_backdoors_csv(capsys):
    code, out, _ = run(capsys, "bench", "backdoors", "--count", "40", "--seed", "2",
                       "--n", "2")
    assert code == 0
    assert out.startswith("#") and "covered_fraction" in out
