/**
 * Policy heatmap view model and canvas renderer.
 *
 * The view model (`buildHeatmap`) is pure: it validates the server grid
 * and turns it into per-cell colors. The canvas layer just paints cells.
 */

import type { PolicyGridPayload } from "./api.js";
import { modeCodeColor } from "./colors.js";

export interface HeatmapState {
  bpmValues: number[];
  noteRanges: number[];
  /** modes[noteRangeIndex][bpmIndex], 0 = IMP_TIMING, 1 = IMP_PITCH */
  modes: number[][];
  /** cell colors, same layout as modes */
  colors: string[][];
}

export function buildHeatmap(payload: PolicyGridPayload): HeatmapState {
  const { bpm_values: bpmValues, note_ranges: noteRanges, modes } = payload;
  if (bpmValues.length !== 151 || noteRanges.length !== 3) {
    throw new Error(
      `malformed policy grid: expected 151x3, got ${bpmValues.length}x${noteRanges.length}`,
    );
  }
  if (modes.length !== noteRanges.length) {
    throw new Error(`malformed policy grid: ${modes.length} mode rows`);
  }
  const colors: string[][] = [];
  for (const row of modes) {
    if (row.length !== bpmValues.length) {
      throw new Error(`malformed policy grid: row of length ${row.length}`);
    }
    colors.push(row.map(modeCodeColor));
  }
  return { bpmValues, noteRanges, modes, colors };
}

export function cellAt(state: HeatmapState, bpm: number, noteRange: number): number {
  const col = state.bpmValues.indexOf(bpm);
  const row = state.noteRanges.indexOf(noteRange);
  if (col < 0 || row < 0) {
    throw new Error(`(${bpm}, ${noteRange}) outside the policy grid`);
  }
  return state.modes[row][col];
}

export function renderHeatmap(canvas: HTMLCanvasElement, state: HeatmapState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const cellW = canvas.width / state.bpmValues.length;
  const cellH = canvas.height / state.noteRanges.length;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  state.colors.forEach((row, i) => {
    row.forEach((color, j) => {
      ctx.fillStyle = color;
      // note_range 0 at the bottom, like the published policy figures
      const y = canvas.height - (i + 1) * cellH;
      ctx.fillRect(j * cellW, y, Math.ceil(cellW), Math.ceil(cellH));
    });
  });
}
