"""Command-line entry point.

Subcommands: gen sudoku, gen sat, transcribe, train, eval, mssc,
bench backdoors, bench oracles. All randomness derives from --seed; every
run logs its fully resolved configuration, and --dry-run stops there.
A --config file holds flat key=value lines; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np


def _add_common(p):
    p.add_argument("--seed", type=int, help="root seed (default 0)")
    p.add_argument("--config", help="key=value overlay file; flags win")
    p.add_argument("--dry-run", action="store_true",
                   help="print the resolved config and exit")
    p.add_argument("--out", help="output file (default stdout)")


def build_parser():
    ap = argparse.ArgumentParser(prog="trialbench")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate problem instances")
    gsub = gen.add_subparsers(dest="kind", required=True)
    gs = gsub.add_parser("sudoku")
    gs.add_argument("--n", type=int, choices=(2, 3))
    gs.add_argument("--count", type=int)
    gs.add_argument("--mode", choices=("exact", "fast"))
    gs.add_argument("--census", help="census table for exact n=3 sampling")
    gs.add_argument("--carve-from", dest="carve_from",
                    help="carve the solved boards in this file instead of sampling")
    gs.add_argument("--workers", type=int)
    _add_common(gs)
    gt = gsub.add_parser("sat")
    gt.add_argument("--vars", type=int, dest="nvars")
    gt.add_argument("--clauses", type=int, dest="nclauses")
    gt.add_argument("--count", type=int)
    _add_common(gt)

    tr = sub.add_parser("transcribe", help="emit DFS or depth-1 transcripts")
    tr.add_argument("--problem", choices=("sudoku", "sat"))
    tr.add_argument("--n", type=int, choices=(2, 3))
    tr.add_argument("--vars", type=int, dest="nvars")
    tr.add_argument("--clauses", type=int, dest="nclauses")
    tr.add_argument("--count", type=int)
    tr.add_argument("--depth1", action="store_true")
    tr.add_argument("--max-tokens", type=int)
    tr.add_argument("--workers", type=int)
    _add_common(tr)

    t = sub.add_parser("train", help="stream-train a toy model")
    t.add_argument("--n", type=int, choices=(2, 3))
    t.add_argument("--steps", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr-peak", type=float)
    t.add_argument("--warmup-steps", type=int)
    t.add_argument("--layers", type=int)
    t.add_argument("--heads", type=int)
    t.add_argument("--embed-dim", type=int)
    t.add_argument("--single-target", action="store_true",
                   help="ablation: plain CE on the taken token")
    t.add_argument("--guess-loss", choices=("l1", "l2"))
    t.add_argument("--checkpoint", help="write the trained model here")
    t.add_argument("--metrics-csv", help="write step/loss/lr/tokens here")
    _add_common(t)

    ev = sub.add_parser("eval", help="greedy-decode puzzles with a checkpoint")
    ev.add_argument("--checkpoint", required=False)
    ev.add_argument("--puzzles", help="file of boards")
    ev.add_argument("--format", choices=("single-line", "grid", "triplets", "auto"))
    ev.add_argument("--n", type=int, choices=(2, 3))
    ev.add_argument("--count", type=int)
    _add_common(ev)

    ms = sub.add_parser("mssc", help="min-sum set cover experiments")
    ms.add_argument("--op", choices=("theory-suite", "example", "optimize"))
    ms.add_argument("--n", type=int)
    ms.add_argument("--instances", type=int)
    ms.add_argument("--instance-file", help="explicit distribution file")
    _add_common(ms)

    be = sub.add_parser("bench", help="model-free statistics")
    bsub = be.add_subparsers(dest="what", required=True)
    bb = bsub.add_parser("backdoors")
    bb.add_argument("--count", type=int)
    bb.add_argument("--n", type=int, choices=(2, 3))
    _add_common(bb)
    bo = bsub.add_parser("oracles")
    bo.add_argument("--count", type=int)
    _add_common(bo)
    return ap


_DEFAULTS = {
    "seed": 0, "count": 10, "n": 3, "mode": "fast", "workers": 1,
    "nvars": 25, "nclauses": 15, "problem": "sudoku", "max_tokens": 4096,
    "steps": 200, "batch_size": 32, "lr_peak": 1e-4, "warmup_steps": 5,
    "layers": 3, "heads": 4, "embed_dim": 64, "guess_loss": "l2",
    "format": "auto", "op": "theory-suite", "instances": 100,
}


class CliError(Exception):
    pass


def resolve_config(args) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as f:
                for line_no, line in enumerate(f, 1):
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    if "=" not in line:
                        raise CliError(f"{args.config}:{line_no}: expected key=value")
                    k, v = line.split("=", 1)
                    cfg[k.strip().replace("-", "_")] = _coerce(v.strip())
        except OSError as e:
            raise CliError(f"cannot read config file: {e}") from None
    for k, v in vars(args).items():
        if k in ("config", "dry_run") or v is None or v is False:
            continue
        cfg[k] = v
    cfg["dry_run"] = bool(getattr(args, "dry_run", False))
    return cfg


def _coerce(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    if v in ("true", "false"):
        return v == "true"
    return v


def _emit(cfg, text: str):
    if cfg.get("out"):
        with open(cfg["out"], "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _log_config(cfg, name):
    shown = {k: v for k, v in sorted(cfg.items()) if v is not None}
    print(f"# {name} config: {json.dumps(shown, default=str)}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_gen_sudoku(cfg) -> str:
    from .generator import SamplerMode, generate
    from .census3 import load_census, load_default_census
    if cfg.get("carve_from"):
        from .board import Board
        from .generator import carve
        try:
            with open(cfg["carve_from"]) as f:
                solutions = [Board.from_single_line(ln.strip())
                             for ln in f if ln.strip()]
        except OSError as e:
            raise CliError(f"cannot read solutions file: {e}") from None
        lines = []
        for i, sol in enumerate(solutions):
            pair = carve(sol, cfg["seed"], stream=i)
            lines.append(f"{pair.puzzle.to_single_line()}\t{pair.solution.to_single_line()}")
        return "\n".join(lines) + "\n"
    mode = SamplerMode(cfg["mode"])
    census = None
    if mode == SamplerMode.EXACT and cfg["n"] == 3:
        census = (load_census(cfg["census"]) if cfg.get("census")
                  else load_default_census())
    lines = []
    if cfg["workers"] > 1:
        from multiprocessing import Pool
        args = [(cfg["n"], cfg["seed"], i, cfg["mode"], cfg.get("census"))
                for i in range(cfg["count"])]
        with Pool(cfg["workers"]) as pool:
            for line in pool.imap(_gen_one_sudoku, args):
                lines.append(line)
    else:
        for pair in generate(cfg["n"], cfg["count"], seed=cfg["seed"],
                             mode=mode, census=census):
            lines.append(f"{pair.puzzle.to_single_line()}\t{pair.solution.to_single_line()}")
    return "\n".join(lines) + "\n"


def _gen_one_sudoku(arg):
    n, seed, i, mode, census_path = arg
    from .generator import SamplerMode, sample_solved, carve
    from .census3 import load_census, load_default_census
    census = None
    if SamplerMode(mode) == SamplerMode.EXACT and n == 3:
        census = load_census(census_path) if census_path else load_default_census()
    sol = sample_solved(n, seed, SamplerMode(mode), census, stream=i)
    pair = carve(sol, seed, stream=i)
    return f"{pair.puzzle.to_single_line()}\t{pair.solution.to_single_line()}"


def _cmd_gen_sat(cfg) -> str:
    from .sat import generate_instance, write_instance
    blocks = []
    for i in range(cfg["count"]):
        inst = generate_instance(cfg["nvars"], cfg["nclauses"], cfg["seed"], stream=i)
        blocks.append(write_instance(inst))
    return "".join(blocks)


def _cmd_transcribe(cfg) -> str:
    from .transcripts import (
        SatAdapter, SudokuAdapter, NoBackdoor, generate_depth1_transcript,
        generate_dfs_transcript, serialize,
    )
    if cfg["problem"] == "sudoku":
        adapter = SudokuAdapter(cfg["n"])
    else:
        adapter = SatAdapter(cfg["nvars"], cfg["nclauses"])
    lines = []
    for i in range(cfg["count"]):
        inst = adapter.generate_instance(seed=cfg["seed"], stream=i)
        try:
            if cfg.get("depth1"):
                tr = generate_depth1_transcript(adapter, inst, seed=cfg["seed"],
                                                stream=i, max_tokens=cfg["max_tokens"])
            else:
                tr = generate_dfs_transcript(adapter, inst, seed=cfg["seed"],
                                             stream=i, max_tokens=cfg["max_tokens"])
            lines.append(serialize(tr))
        except NoBackdoor as e:
            lines.append(json.dumps({"v": 1, "tokens": [], "targets": [],
                                     "mask": [], "meta": {"skipped": str(e),
                                                          "stream": i}},
                                    sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def _cmd_train(cfg) -> str:
    from .experiments import transcript_stream
    from .model import Model, ModelConfig
    from .training import TrainConfig, save_checkpoint, train
    from .transcripts import SudokuAdapter
    ad = SudokuAdapter(cfg["n"])
    mc = ModelConfig(vocab_size=ad.vocab.size, layers=cfg["layers"],
                     heads=cfg["heads"], embed_dim=cfg["embed_dim"],
                     max_positions=512)
    model = Model(mc, seed=cfg["seed"])
    tc = TrainConfig(batch_size=cfg["batch_size"], steps=cfg["steps"],
                     lr_peak=cfg["lr_peak"], warmup_steps=cfg["warmup_steps"],
                     multi_target=not cfg.get("single_target", False),
                     guess_loss=cfg["guess_loss"], seed=cfg["seed"])
    res = train(model, transcript_stream(cfg["n"], seed=cfg["seed"] + 1), tc)
    if cfg.get("checkpoint"):
        save_checkpoint(model, cfg["checkpoint"])
    if cfg.get("metrics_csv"):
        with open(cfg["metrics_csv"], "w") as f:
            f.write(res.metrics_csv())
    last = res.metrics[-1] if res.metrics else (0, float("nan"), 0, 0)
    return (f"trained {last[0]} steps, final loss {last[1]:.4f}, "
            f"tokens seen {res.tokens_seen}\n")


def detect_format(text: str) -> str:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    first = lines[0].strip()
    if " " in first and all(len(t) == 3 and t.isdigit() for t in first.split()):
        return "triplets"
    if len(first) in (16, 81) and first.isdigit():
        return "single-line"
    if len(first) in (4, 9) and first.isdigit():
        return "grid"
    raise CliError("cannot auto-detect board format; pass --format")


def _read_boards(cfg):
    from .board import Board
    if not cfg.get("puzzles"):
        raise CliError("eval needs --puzzles FILE")
    try:
        with open(cfg["puzzles"]) as f:
            text = f.read()
    except OSError as e:
        raise CliError(f"cannot read puzzle file: {e}") from None
    fmt = cfg["format"]
    if fmt == "auto":
        fmt = detect_format(text)
    boards = []
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if fmt == "single-line":
        for ln in lines:
            boards.append(Board.from_single_line(ln.split()[0]))
    elif fmt == "triplets":
        for ln in lines:
            boards.append(Board.from_triplets(ln))
    else:
        m = len(lines[0].strip())
        for i in range(0, len(lines), m):
            boards.append(Board.from_grid("\n".join(lines[i:i + m])))
    return boards


def _cmd_eval(cfg) -> str:
    from .evalbench import board_cell_accuracy, rule_logic_accuracy
    from .training import load_checkpoint
    from .board import solve_unique
    from .decoding import decode_greedy
    from .vocab import Vocab
    boards = _read_boards(cfg)
    if cfg.get("count"):
        boards = boards[:cfg["count"]]
    if not cfg.get("checkpoint"):
        raise CliError("eval needs --checkpoint PATH")
    model = load_checkpoint(cfg["checkpoint"])
    n = 2 if boards[0].m == 4 else 3
    vocab = Vocab("sudoku", n)
    from .experiments import eval_prompts, _replay_onto

    preds = []
    truths = []
    gen_tokens = []
    for b in boards:
        prompt = eval_prompts([_FakePair(b)], vocab)[0]
        out, _ = decode_greedy(model, prompt, max_len=300)
        gen_tokens.append(out)
        preds.append(_replay_onto(b, out, vocab))
        truths.append(solve_unique(b))
    board_acc, cell_acc = board_cell_accuracy(preds, truths)
    from .evalbench import rule_logic_correct
    rl = sum(rule_logic_correct(b, out, vocab)
             for b, out in zip(boards, gen_tokens)) / len(boards)
    return (f"boards evaluated: {len(boards)}\n"
            f"board_accuracy: {board_acc:.4f}\n"
            f"cell_accuracy: {cell_acc:.4f}\n"
            f"rule_logic_accuracy: {rl:.4f}\n")


class _FakePair:
    def __init__(self, puzzle):
        self.puzzle = puzzle


def _cmd_mssc(cfg) -> str:
    from .mssc import (
        brute_force_permutation, cost_nonadaptive, cost_permutation,
        example_marginals, greedy_adaptive, harmonic, optimize_nonadaptive,
        random_distribution, read_distribution, sqrt_q_policy,
    )
    from .rng import make_rng
    rows = ["instance,method,exact_cost"]
    if cfg["op"] == "example":
        d = example_marginals(cfg["n"] if cfg.get("n") else 3)
        tau, opt = brute_force_permutation(d)
        _, g = greedy_adaptive(d)
        rows.append(f"example,brute_force,{opt}")
        rows.append(f"example,greedy,{g}")
        rows.append(f"example,marginal_order,"
                    f"{cost_permutation(tuple(range(1, d.n + 1)), d)}")
    elif cfg["op"] == "optimize":
        if cfg.get("instance_file"):
            with open(cfg["instance_file"]) as f:
                d = read_distribution(f.read())
        else:
            d = example_marginals(cfg.get("n") or 3)
        pi, cost = optimize_nonadaptive(d, seed=cfg["seed"])
        rows.append(f"opt,pgd,{float(cost):.9f}")
        tau, opt = brute_force_permutation(d)
        rows.append(f"opt,brute_force,{opt}")
        rows.append(f"opt,hn_bound,{float(harmonic(d.n) * opt):.9f}")
    else:
        rng = make_rng(cfg["seed"], 71)
        for i in range(cfg["instances"]):
            n = int(rng.integers(2, 9))
            d = random_distribution(n, 12, rng)
            tau, opt = brute_force_permutation(d)
            _, g = greedy_adaptive(d)
            pi = sqrt_q_policy(tau, d)
            rows.append(f"{i},brute_force,{opt}")
            rows.append(f"{i},greedy,{g}")
            rows.append(f"{i},sqrt_q,{float(cost_nonadaptive(pi, d)):.9f}")
    return "\n".join(rows) + "\n"


def _cmd_bench_backdoors(cfg) -> str:
    from .evalbench import backdoor_census
    rep = backdoor_census(cfg["count"], cfg["seed"], n=cfg["n"])
    head = (f"# puzzles={rep.count} rules_complete={rep.rules_complete} "
            f"one_guess={rep.one_guess} neither={rep.neither} "
            f"covered_fraction={rep.covered_fraction:.4f}\n")
    rows = ["backdoors,puzzles"]
    if rep.backdoor_counts:
        binc = np.bincount(rep.backdoor_counts)
        for k in range(1, len(binc)):
            if binc[k]:
                rows.append(f"{k},{binc[k]}")
    return head + "\n".join(rows) + "\n"


def _cmd_bench_oracles(cfg) -> str:
    from .evalbench import oracle_median_run
    rep = oracle_median_run(cfg["count"], cfg["seed"])
    head = (f"# puzzles={rep.puzzles} skipped={rep.skipped} "
            f"upper_sim_median={rep.upper_hist.median:.3f} "
            f"lower_sim_median={rep.lower_hist.median:.3f} "
            f"upper_expected_median={rep.upper_expected_median:.3f} "
            f"lower_expected_median={rep.lower_expected_median:.3f}\n")
    return head + rep.to_csv()


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        cfg = resolve_config(args)
        name = args.command + (f" {getattr(args, 'kind', '')}" if args.command == "gen"
                               else f" {getattr(args, 'what', '')}" if args.command == "bench"
                               else "")
        _log_config(cfg, name.strip())
        if cfg["dry_run"]:
            return 0
        if args.command == "gen":
            text = _cmd_gen_sudoku(cfg) if args.kind == "sudoku" else _cmd_gen_sat(cfg)
        elif args.command == "transcribe":
            text = _cmd_transcribe(cfg)
        elif args.command == "train":
            text = _cmd_train(cfg)
        elif args.command == "eval":
            text = _cmd_eval(cfg)
        elif args.command == "mssc":
            text = _cmd_mssc(cfg)
        elif args.command == "bench":
            text = (_cmd_bench_backdoors(cfg) if args.what == "backdoors"
                    else _cmd_bench_oracles(cfg))
        else:
            raise CliError(f"unknown command {args.command}")
        _emit(cfg, text)
        return 0
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
