import { describe, expect, it } from "vitest";

import {
  backdoorCensus, carve, generate, transcribe, validateBoardBatch,
} from "../src/index.js";
import { runCli } from "../src/runner.js";

function renderBatch(batch: ReturnType<typeof generate>): string {
  const lines: string[] = [];
  for (let i = 0; i < batch.count; i++) {
    const p = Array.from(
      batch.puzzles.slice(i * batch.cells, (i + 1) * batch.cells)).join("");
    const s = Array.from(
      batch.solutions.slice(i * batch.cells, (i + 1) * batch.cells)).join("");
    lines.push(`${p}\t${s}`);
  }
  return lines.join("\n") + "\n";
}

describe("generate parity", () => {
  it("matches the CLI byte-for-byte over 1000 instances (n=2)", () => {
    const batch = generate({ n: 2, count: 1000, seed: 42, mode: "fast" });
    const cli = runCli(["gen", "sudoku", "--n", "2", "--count", "1000",
                        "--seed", "42", "--mode", "fast"]);
    expect(batch.count).toBe(1000);
    expect(renderBatch(batch)).toBe(cli);
  });

  it("matches the CLI over 100 instances (n=3)", () => {
    const batch = generate({ n: 3, count: 100, seed: 7 });
    const cli = runCli(["gen", "sudoku", "--n", "3", "--count", "100",
                        "--seed", "7", "--mode", "fast"]);
    expect(renderBatch(batch)).toBe(cli);
  });

  it("solutions complete their puzzles", () => {
    const batch = generate({ n: 3, count: 25, seed: 11 });
    expect(validateBoardBatch(batch)).toBe(true);
  });

  it("rejects unsupported orders", () => {
    expect(() => generate({ n: 4 as 2, count: 1, seed: 0 })).toThrow(/only 2 and 3/);
  });
});

describe("carve parity", () => {
  it("carving bound solutions equals carving via the CLI", () => {
    const batch = generate({ n: 3, count: 10, seed: 13 });
    const carved = carve(batch.solutions, 3, 13);
    expect(carved.count).toBe(10);
    expect(validateBoardBatch(carved)).toBe(true);
    for (let i = 0; i < carved.count; i++) {
      for (let k = 0; k < 81; k++) {
        expect(carved.solutions[i * 81 + k]).toBe(batch.solutions[i * 81 + k]);
      }
    }
  });
});

describe("transcribe parity", () => {
  it("token and target content equals the CLI output (sudoku n=2, 1000)", () => {
    const batch = transcribe({ problem: "sudoku", n: 2, count: 1000, seed: 5 });
    const raw = runCli(["transcribe", "--problem", "sudoku", "--n", "2",
                        "--count", "1000", "--seed", "5"])
      .trim().split("\n");
    expect(batch.tokenOffsets.length).toBe(1001);
    let pos = 0;
    raw.forEach((line, i) => {
      const rec = JSON.parse(line);
      const lo = batch.tokenOffsets[i];
      const hi = batch.tokenOffsets[i + 1];
      expect(Array.from(batch.tokens.slice(lo, hi))).toEqual(rec.tokens);
      for (const t of rec.targets) {
        const tlo = batch.targetOffsets[pos];
        const thi = batch.targetOffsets[pos + 1];
        expect(Array.from(batch.targets.slice(tlo, thi))).toEqual(t);
        pos += 1;
      }
    });
    expect(pos).toBe(batch.tokenOffsets[1000]);
  });

  it("depth-1 marks rules-complete puzzles as skipped", () => {
    const batch = transcribe({ problem: "sudoku", n: 3, count: 30, seed: 9,
                               depth1: true });
    expect(batch.skipped.length).toBeGreaterThan(0);
    expect(batch.tokenOffsets.length - 1 + batch.skipped.length).toBe(30);
    for (const m of batch.meta) {
      expect(m["kind"]).toBe("depth1");
    }
  });

  it("SAT transcripts parse and stay aligned", () => {
    const batch = transcribe({ problem: "sat", vars: 25, clauses: 15,
                               count: 50, seed: 3 });
    expect(batch.tokenOffsets.length).toBe(51);
    expect(batch.mask.length).toBe(batch.tokens.length);
  });
});

describe("backdoor census", () => {
  it("returns consistent fractions", () => {
    const rep = backdoorCensus(150, 21, 3);
    expect(rep.rulesComplete + rep.oneGuess + rep.neither).toBe(rep.count);
    expect(rep.coveredFraction).toBeGreaterThan(0.9);
  });
});
