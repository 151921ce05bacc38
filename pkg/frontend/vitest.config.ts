import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // Parity tests spawn one engine subprocess per case.
    testTimeout: 300_000,
    hookTimeout: 120_000,
  },
});
