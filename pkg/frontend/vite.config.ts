import { defineConfig } from "vitest/config";

export default defineConfig({
  build: { outDir: "dist", sourcemap: true },
  server: {
    port: 5173,
  },
  test: {
    environment: "node",
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
