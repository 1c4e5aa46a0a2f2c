import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // the dashboard suite boots the real service and ingests the fixture
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
