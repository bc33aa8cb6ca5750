/**
 * Array-returning bindings over the trialbench core.
 *
 * The layer contains no generator or solver logic: every call drives the
 * command-line interface and marshals its output into typed arrays. Ragged
 * results come back as (flat values, offsets) pairs, where offsets has one
 * more entry than there are rows and row i spans [offsets[i], offsets[i+1]).
 */

import * as os from "node:os";
import * as fs from "node:fs";
import * as path from "node:path";
import { runCli } from "./runner.js";

export type SamplerMode = "fast" | "exact";

export interface GenerateOptions {
  n: 2 | 3;
  count: number;
  seed: number;
  mode?: SamplerMode;
  censusPath?: string;
}

export interface BoardBatch {
  /** count × cells row-major digits, 0 = empty */
  puzzles: Int32Array;
  solutions: Int32Array;
  count: number;
  cells: number;
}

function parseBoardLines(text: string, cells: number): BoardBatch {
  const lines = text.trim().split("\n").filter((l) => l.length > 0);
  const puzzles = new Int32Array(lines.length * cells);
  const solutions = new Int32Array(lines.length * cells);
  lines.forEach((line, i) => {
    const [p, s] = line.split("\t");
    if (!p || !s || p.length !== cells || s.length !== cells) {
      throw new Error(`malformed board line ${i + 1}`);
    }
    for (let k = 0; k < cells; k++) {
      puzzles[i * cells + k] = p.charCodeAt(k) - 48;
      solutions[i * cells + k] = s.charCodeAt(k) - 48;
    }
  });
  return { puzzles, solutions, count: lines.length, cells };
}

export function generate(opts: GenerateOptions): BoardBatch {
  if (opts.n !== 2 && opts.n !== 3) {
    throw new Error(`unsupported block order ${opts.n}; only 2 and 3 exist`);
  }
  const args = [
    "gen", "sudoku",
    "--n", String(opts.n),
    "--count", String(opts.count),
    "--seed", String(opts.seed),
    "--mode", opts.mode ?? "fast",
  ];
  if (opts.censusPath) args.push("--census", opts.censusPath);
  const cells = opts.n === 2 ? 16 : 81;
  return parseBoardLines(runCli(args), cells);
}

export function carve(solutions: Int32Array | number[][], n: 2 | 3, seed: number): BoardBatch {
  const cells = n === 2 ? 16 : 81;
  const rows: string[] = [];
  if (Array.isArray(solutions)) {
    for (const row of solutions) rows.push(row.join(""));
  } else {
    for (let i = 0; i < solutions.length; i += cells) {
      rows.push(Array.from(solutions.slice(i, i + cells)).join(""));
    }
  }
  const tmp = path.join(os.tmpdir(), `tb-solutions-${process.pid}-${Date.now()}.txt`);
  fs.writeFileSync(tmp, rows.join("\n") + "\n");
  try {
    const out = runCli(["gen", "sudoku", "--n", String(n), "--seed", String(seed),
                        "--carve-from", tmp]);
    return parseBoardLines(out, cells);
  } finally {
    fs.unlinkSync(tmp);
  }
}

export interface TranscribeOptions {
  problem: "sudoku" | "sat";
  count: number;
  seed: number;
  n?: 2 | 3;
  vars?: number;
  clauses?: number;
  depth1?: boolean;
}

export interface TranscriptBatch {
  /** token ids, flat; transcript i spans tokenOffsets[i]..tokenOffsets[i+1] */
  tokens: Int32Array;
  tokenOffsets: Int32Array;
  /** per-position valid-next-token sets, flat; position p of the whole batch
   * spans targetOffsets[p]..targetOffsets[p+1]; positions align 1:1 with
   * tokens, so tokenOffsets indexes positions too */
  targets: Int32Array;
  targetOffsets: Int32Array;
  /** 1 where the position carries loss */
  mask: Uint8Array;
  /** indices of requested instances that were skipped (e.g. no backdoor) */
  skipped: Int32Array;
  meta: Record<string, unknown>[];
}

export function transcribe(opts: TranscribeOptions): TranscriptBatch {
  const args = ["transcribe", "--problem", opts.problem,
                "--count", String(opts.count), "--seed", String(opts.seed)];
  if (opts.problem === "sudoku") args.push("--n", String(opts.n ?? 3));
  else args.push("--vars", String(opts.vars ?? 25), "--clauses", String(opts.clauses ?? 15));
  if (opts.depth1) args.push("--depth1");
  const lines = runCli(args).trim().split("\n").filter((l) => l.length > 0);

  const tokens: number[] = [];
  const tokenOffsets: number[] = [0];
  const targets: number[] = [];
  const targetOffsets: number[] = [0];
  const mask: number[] = [];
  const skipped: number[] = [];
  const meta: Record<string, unknown>[] = [];
  lines.forEach((line, i) => {
    const rec = JSON.parse(line) as {
      v: number; tokens: number[]; targets: number[][]; mask: number[];
      meta: Record<string, unknown>;
    };
    if (rec.v !== 1) throw new Error(`unsupported transcript schema version ${rec.v}`);
    if (rec.meta && "skipped" in rec.meta) {
      skipped.push(i);
      return;
    }
    tokens.push(...rec.tokens);
    tokenOffsets.push(tokens.length);
    for (const t of rec.targets) {
      targets.push(...t);
      targetOffsets.push(targets.length);
    }
    mask.push(...rec.mask);
    meta.push(rec.meta);
  });
  return {
    tokens: Int32Array.from(tokens),
    tokenOffsets: Int32Array.from(tokenOffsets),
    targets: Int32Array.from(targets),
    targetOffsets: Int32Array.from(targetOffsets),
    mask: Uint8Array.from(mask),
    skipped: Int32Array.from(skipped),
    meta,
  };
}

export interface BackdoorCensusResult {
  count: number;
  rulesComplete: number;
  oneGuess: number;
  neither: number;
  coveredFraction: number;
  /** histogram over backdoor counts: backdoors k in row i of pairs */
  backdoorCounts: Int32Array;
  puzzlesWithCount: Int32Array;
}

export function backdoorCensus(count: number, seed: number, n: 2 | 3 = 3): BackdoorCensusResult {
  const out = runCli(["bench", "backdoors", "--count", String(count),
                      "--seed", String(seed), "--n", String(n)]);
  const lines = out.trim().split("\n");
  const head = lines[0];
  const grab = (k: string) => {
    const m = head.match(new RegExp(`${k}=([0-9.]+)`));
    if (!m) throw new Error(`missing ${k} in census header`);
    return Number(m[1]);
  };
  const ks: number[] = [];
  const vs: number[] = [];
  for (const line of lines.slice(2)) {
    const [k, v] = line.split(",").map(Number);
    ks.push(k);
    vs.push(v);
  }
  return {
    count: grab("puzzles"),
    rulesComplete: grab("rules_complete"),
    oneGuess: grab("one_guess"),
    neither: grab("neither"),
    coveredFraction: grab("covered_fraction"),
    backdoorCounts: Int32Array.from(ks),
    puzzlesWithCount: Int32Array.from(vs),
  };
}

export function validateBoardBatch(batch: BoardBatch): boolean {
  const m = Math.sqrt(batch.cells);
  for (let i = 0; i < batch.count; i++) {
    for (let k = 0; k < batch.cells; k++) {
      const p = batch.puzzles[i * batch.cells + k];
      const s = batch.solutions[i * batch.cells + k];
      if (s < 1 || s > m) return false;
      if (p !== 0 && p !== s) return false;
    }
  }
  return true;
}
