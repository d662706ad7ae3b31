/**
 * Global setup: launch the real service (training a small fixture model on
 * first run, cached under .cache/) and expose its base URL to the tests.
 * Set SCENEGEN_E2E=skip to run only the unit tests.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { GlobalSetupContext } from "vitest/node";

declare module "vitest" {
  export interface ProvidedContext {
    e2eBase: string;
  }
}

const root = dirname(dirname(fileURLToPath(import.meta.url)));

let child: ChildProcess | null = null;

async function waitForHealth(base: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${base}/api/health`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    if (child && child.exitCode !== null) {
      throw new Error(`service exited early with code ${child.exitCode}`);
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error("service did not become healthy in time");
}

export default async function setup({ provide }: GlobalSetupContext): Promise<() => void> {
  if (process.env.SCENEGEN_E2E === "skip") {
    provide("e2eBase", "");
    return () => {};
  }
  const port = 8900 + Math.floor(Math.random() * 100);
  const base = `http://127.0.0.1:${port}`;
  const cache = join(root, ".cache");
  mkdirSync(cache, { recursive: true });
  child = spawn(
    "python3",
    [join(root, "scripts", "e2e_service.py"), String(port), cache],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  await waitForHealth(base, 180_000);
  provide("e2eBase", base);
  return () => {
    child?.kill("SIGTERM");
  };
}
