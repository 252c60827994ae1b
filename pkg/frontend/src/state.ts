/**
 * Session view state: history rows, optimistic observation handling,
 * and the invariant that the displayed point count always matches the
 * server-reported one once a response lands.
 */

import type { ObservationBody, ObservationResult, Recommendation } from "./api.js";

export interface HistoryRow {
  index: number;
  bpm: number;
  noteRange: number;
  mode: string;
  preTiming: number;
  prePitch: number;
  postTiming: number;
  postPitch: number;
  utility: number | null; // null while the submission is in flight
  pending: boolean;
}

export interface SessionView {
  sessionId: string;
  pointCount: number;
  history: HistoryRow[];
  lastRecommendation: Recommendation | null;
  banner: string | null;
}

export function freshView(sessionId: string): SessionView {
  return {
    sessionId,
    pointCount: 0,
    history: [],
    lastRecommendation: null,
    banner: null,
  };
}

export function optimisticAppend(view: SessionView, body: ObservationBody): SessionView {
  const row: HistoryRow = {
    index: view.history.length + 1,
    bpm: body.bpm,
    noteRange: body.note_range,
    mode: body.mode,
    preTiming: body.error_pre.timing,
    prePitch: body.error_pre.pitch,
    postTiming: body.error_post.timing,
    postPitch: body.error_post.pitch,
    utility: null,
    pending: true,
  };
  return { ...view, history: [...view.history, row], banner: null };
}

export function confirmAppend(view: SessionView, result: ObservationResult): SessionView {
  const history = view.history.slice();
  for (let i = history.length - 1; i >= 0; i--) {
    if (history[i].pending) {
      history[i] = { ...history[i], pending: false, utility: result.utility };
      break;
    }
  }
  return { ...view, history, pointCount: result.point_count };
}

export function rollbackAppend(view: SessionView, message: string): SessionView {
  const history = view.history.slice();
  for (let i = history.length - 1; i >= 0; i--) {
    if (history[i].pending) {
      history.splice(i, 1);
      break;
    }
  }
  return { ...view, history, banner: message };
}

export function recordAutopilotRow(
  view: SessionView,
  step: { task: { bpm: number; note_range: number }; mode: string; utility: number; point_count: number },
): SessionView {
  const row: HistoryRow = {
    index: view.history.length + 1,
    bpm: step.task.bpm,
    noteRange: step.task.note_range,
    mode: step.mode,
    preTiming: NaN,
    prePitch: NaN,
    postTiming: NaN,
    postPitch: NaN,
    utility: step.utility,
    pending: false,
  };
  return { ...view, history: [...view.history, row], pointCount: step.point_count };
}

/** The history table row count must equal the server-reported point count. */
export function isConsistent(view: SessionView): boolean {
  return view.history.filter((r) => !r.pending).length === view.pointCount;
}
