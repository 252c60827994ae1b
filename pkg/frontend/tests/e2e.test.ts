/**
 * End-to-end contract tests against the real scaffold service: the UI
 * view models must display exactly what the server reports.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ScaffoldApi, ServerError } from "../src/api.js";
import { buildHeatmap } from "../src/heatmap.js";
import {
  confirmAppend,
  freshView,
  isConsistent,
  optimisticAppend,
  recordAutopilotRow,
  rollbackAppend,
} from "../src/state.js";
import type { SessionView } from "../src/state.js";
import { type LiveServer, startServer } from "./server.js";

const PORT = 8931 + (process.pid % 500);

let server: LiveServer;
let api: ScaffoldApi;

beforeAll(async () => {
  server = await startServer(PORT);
  api = new ScaffoldApi(server.baseUrl);
}, 40_000);

afterAll(async () => {
  await server?.stop();
});

describe("scripted autopilot session (bad_pitch, noise 0, 50 steps)", () => {
  it("drives a heatmap that agrees with the server grid cell for cell", async () => {
    const summary = await api.createSession({ autopilot: "bad_pitch", seed: 4 });
    let view: SessionView = freshView(summary.id);
    for (let i = 0; i < 50; i++) {
      const step = await api.autopilotStep(summary.id);
      view = recordAutopilotRow(view, step);
    }
    expect(view.pointCount).toBe(50);
    expect(isConsistent(view)).toBe(true);

    const policy = await api.policy(summary.id);
    const heatmap = buildHeatmap(policy);
    // cell-for-cell: the displayed state is exactly the server's grid
    expect(heatmap.modes).toEqual(policy.modes);
    let cells = 0;
    heatmap.modes.forEach((row, i) =>
      row.forEach((cell, j) => {
        expect(cell).toBe(policy.modes[i][j]);
        cells++;
      }),
    );
    expect(cells).toBe(453);
  }, 120_000);
});

describe("observation submission", () => {
  it("updates the displayed point count within one round trip", async () => {
    const summary = await api.createSession({ sim: { mean_utility: 0.0 } });
    let view = freshView(summary.id);
    const body = {
      bpm: 100,
      note_range: 1,
      mode: "IMP_PITCH",
      error_pre: { timing: 10, pitch: 1.5 },
      error_post: { timing: 5, pitch: 1.5 },
    };
    view = optimisticAppend(view, body);
    const result = await api.observe(summary.id, body);
    view = confirmAppend(view, result);
    expect(result.utility).toBe(5.0);
    expect(view.pointCount).toBe(1);
    const onServer = await api.getSession(summary.id);
    expect(view.pointCount).toBe(onServer.point_count);
    expect(isConsistent(view)).toBe(true);
  });

  it("rolls back the optimistic row when the server rejects", async () => {
    const summary = await api.createSession({});
    let view = freshView(summary.id);
    const bad = {
      bpm: 100,
      note_range: 1,
      mode: "IMP_PITCH",
      error_pre: { timing: -3, pitch: 1.5 },
      error_post: { timing: 5, pitch: 1.5 },
    };
    view = optimisticAppend(view, bad);
    try {
      const result = await api.observe(summary.id, bad);
      view = confirmAppend(view, result);
    } catch (error) {
      const message = error instanceof ServerError ? error.message : String(error);
      view = rollbackAppend(view, message);
    }
    expect(view.history).toHaveLength(0);
    expect(view.banner).toMatch(/>= 0/);
    expect((await api.getSession(summary.id)).point_count).toBe(0);
  });
});

describe("persisted session reload", () => {
  it("reproduces recommendations at 100 grid points within 1e-10", async () => {
    const summary = await api.createSession({ autopilot: "balanced", seed: 17 });
    for (let i = 0; i < 20; i++) {
      await api.autopilotStep(summary.id);
    }
    const tasks: Array<{ bpm: number; note_range: number }> = [];
    // deterministic spread of 100 grid points
    for (let i = 0; i < 100; i++) {
      tasks.push({ bpm: 50 + ((i * 37) % 151), note_range: i % 3 });
    }
    const before = [];
    for (const task of tasks) {
      before.push(await api.recommend(summary.id, task));
    }

    // restart the service on the same state directory
    await server.stop();
    server = await startServer(PORT, server.stateDir);
    api = new ScaffoldApi(server.baseUrl);

    for (let i = 0; i < tasks.length; i++) {
      const after = await api.recommend(summary.id, tasks[i]);
      expect(after.mode).toBe(before[i].mode);
      for (const mode of ["IMP_TIMING", "IMP_PITCH"]) {
        expect(Math.abs(after.posteriors[mode].mean - before[i].posteriors[mode].mean))
          .toBeLessThanOrEqual(1e-10);
        expect(Math.abs(after.posteriors[mode].std - before[i].posteriors[mode].std))
          .toBeLessThanOrEqual(1e-10);
      }
    }
  }, 120_000);
});
