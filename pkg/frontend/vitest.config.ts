import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // The integration test trains a model and drives a live service.
    testTimeout: 120_000,
    hookTimeout: 120_000,
    pool: "forks",
  },
});
