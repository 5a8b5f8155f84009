import { defineConfig } from "vite";

// The dev server proxies API and socket traffic to the teaching service
// (`skillgraph serve --port 8733`).

export default defineConfig({
  server: {
    proxy: {
      "/ws": { target: "ws://127.0.0.1:8733", ws: true },
      "/healthz": "http://127.0.0.1:8733",
      "/scenarios": "http://127.0.0.1:8733",
    },
  },
});
