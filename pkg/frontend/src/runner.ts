/**
 * Process plumbing: every binding call shells out to the trialbench CLI and
 * parses its stdout. The command can be overridden with TRIALBENCH_CMD
 * (space-separated), defaulting to `python3 -m trialbench.cli`.
 */

import { spawnSync } from "node:child_process";

export function cliCommand(): string[] {
  const env = process.env.TRIALBENCH_CMD;
  if (env && env.trim().length > 0) return env.trim().split(/\s+/);
  return ["python3", "-m", "trialbench.cli"];
}

export function runCli(args: string[], input?: string): string {
  const [cmd, ...base] = cliCommand();
  const res = spawnSync(cmd, [...base, ...args], {
    input,
    encoding: "utf8",
    maxBuffer: 1 << 28,
  });
  if (res.error) throw res.error;
  if (res.status !== 0) {
    throw new Error(
      `trialbench ${args.join(" ")} exited ${res.status}: ${res.stderr}`
    );
  }
  return res.stdout;
}
