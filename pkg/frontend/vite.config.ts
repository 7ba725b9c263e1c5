import { defineConfig } from 'vitest/config';

export default defineConfig({
  server: {
    proxy: {
      '/api': {
        target: 'http://127.0.0.1:8000',
        ws: true,
      },
    },
  },
  test: {
    environment: 'jsdom',
    // the live test boots the Python gateway, give it room
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
