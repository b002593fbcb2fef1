import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    globalSetup: ['tests/server.ts'],
    testTimeout: 30000,
    hookTimeout: 60000,
    // all tests share one seeded server; run files sequentially
    fileParallelism: false,
  },
})
