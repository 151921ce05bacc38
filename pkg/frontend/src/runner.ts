/**
 * Engine subprocess plumbing.
 *
 * The bindings talk to the projection engine exclusively through its CLI
 * and file formats; every call gets a private scratch directory that is
 * removed afterwards. CROSSPROJ_CLI overrides the executable (either a
 * single binary name or a space-separated command prefix such as
 * "python3 -m crossproj.cli").
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { BindingError } from "./types.js";

function cliCommand(): string[] {
  const env = process.env.CROSSPROJ_CLI;
  if (env && env.trim()) return env.trim().split(/\s+/);
  return ["crossproj"];
}

/** Run one engine subcommand; throws BindingError with the engine's stderr. */
export function runEngine(args: string[]): string {
  const [cmd, ...prefix] = cliCommand();
  const proc = spawnSync(cmd, [...prefix, ...args], { encoding: "utf8" });
  if (proc.error) {
    throw new BindingError(`failed to launch engine '${cmd}': ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    const detail = (proc.stderr || proc.stdout || "").trim();
    throw new BindingError(
      detail || `engine exited with status ${proc.status}`,
      proc.status ?? undefined,
    );
  }
  return proc.stdout;
}

/** Create a scratch dir, run the body, always clean up. */
export function withScratch<T>(body: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "crossproj-"));
  try {
    return body(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
