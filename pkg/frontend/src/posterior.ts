/**
 * Posterior surface charts: mean and std per practice mode as SVG line
 * charts over bpm, one polyline per note range.
 */

import type { PosteriorPayload } from "./api.js";

export interface Series {
  noteRange: number;
  points: Array<{ bpm: number; value: number }>;
}

export interface SurfaceData {
  mode: string;
  mean: Series[];
  std: Series[];
}

const NR_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c"];

export function buildSurfaces(payload: PosteriorPayload): SurfaceData {
  const byNr = new Map<number, { mean: Series; std: Series }>();
  for (const row of payload.rows) {
    let entry = byNr.get(row.note_range);
    if (!entry) {
      entry = {
        mean: { noteRange: row.note_range, points: [] },
        std: { noteRange: row.note_range, points: [] },
      };
      byNr.set(row.note_range, entry);
    }
    entry.mean.points.push({ bpm: row.bpm, value: row.mean });
    entry.std.points.push({ bpm: row.bpm, value: row.std });
  }
  const ranges = [...byNr.keys()].sort((a, b) => a - b);
  for (const nr of ranges) {
    const entry = byNr.get(nr)!;
    entry.mean.points.sort((a, b) => a.bpm - b.bpm);
    entry.std.points.sort((a, b) => a.bpm - b.bpm);
  }
  return {
    mode: payload.mode,
    mean: ranges.map((nr) => byNr.get(nr)!.mean),
    std: ranges.map((nr) => byNr.get(nr)!.std),
  };
}

function polyline(series: Series, width: number, height: number,
                  lo: number, hi: number): string {
  const bpmMin = series.points[0].bpm;
  const bpmMax = series.points[series.points.length - 1].bpm;
  const span = hi - lo || 1;
  return series.points
    .map((p) => {
      const x = ((p.bpm - bpmMin) / (bpmMax - bpmMin)) * width;
      const y = height - ((p.value - lo) / span) * height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

export function surfaceSvg(seriesList: Series[], title: string,
                           width = 360, height = 160): string {
  const values = seriesList.flatMap((s) => s.points.map((p) => p.value));
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const lines = seriesList
    .map(
      (s, i) =>
        `<polyline fill="none" stroke="${NR_COLORS[i % NR_COLORS.length]}" stroke-width="1.5" ` +
        `points="${polyline(s, width - 20, height - 30, lo, hi)}" transform="translate(10,20)"/>`,
    )
    .join("");
  const legend = seriesList
    .map(
      (s, i) =>
        `<text x="${12 + i * 90}" y="12" fill="${NR_COLORS[i % NR_COLORS.length]}" ` +
        `font-size="10">note range ${s.noteRange}</text>`,
    )
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">` +
    `<text x="${width / 2}" y="12" text-anchor="middle" font-size="11">${title}</text>` +
    legend +
    lines +
    `</svg>`
  );
}
