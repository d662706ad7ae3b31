import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    globalSetup: ["tests/e2e.setup.ts"],
    testTimeout: 60_000,
    hookTimeout: 240_000,
  },
});
