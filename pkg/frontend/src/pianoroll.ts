/**
 * Simplified piano-roll rendering of a generated score: one SVG rect per
 * note, x = onset/duration in beats, y = pitch.
 */

export interface ScoreNote {
  pitch: number;
  onset_beats: number;
  duration_beats: number;
  hand: string;
}

export interface ScoreData {
  parameters: { bpm: number; note_range: number };
  notes: ScoreNote[];
  bpm_effective: number | null;
  mode_applied: string | null;
}

export interface RollRect {
  x: number;
  y: number;
  width: number;
  height: number;
  pitch: number;
}

export function rollLayout(score: ScoreData, width = 640, height = 160): RollRect[] {
  if (score.notes.length === 0) return [];
  const totalBeats = score.notes.reduce(
    (acc, n) => Math.max(acc, n.onset_beats + n.duration_beats),
    0,
  );
  const pitches = score.notes.map((n) => n.pitch);
  const lo = Math.min(...pitches) - 1;
  const hi = Math.max(...pitches) + 1;
  const rowH = height / (hi - lo + 1);
  return score.notes.map((n) => ({
    x: (n.onset_beats / totalBeats) * width,
    width: (n.duration_beats / totalBeats) * width - 1,
    y: height - (n.pitch - lo + 1) * rowH,
    height: rowH - 1,
    pitch: n.pitch,
  }));
}

export function rollSvg(score: ScoreData, width = 640, height = 160): string {
  const rects = rollLayout(score, width, height)
    .map(
      (r) =>
        `<rect x="${r.x.toFixed(1)}" y="${r.y.toFixed(1)}" width="${r.width.toFixed(1)}" ` +
        `height="${r.height.toFixed(1)}" fill="#3b6ea5"><title>${r.pitch}</title></rect>`,
    )
    .join("");
  const tempo =
    score.bpm_effective === null ? "untimed (pitch practice)" : `${score.bpm_effective} bpm`;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height + 18}" ` +
    `viewBox="0 0 ${width} ${height + 18}">` +
    `<text x="4" y="12" font-size="11">${tempo}</text>` +
    `<g transform="translate(0,18)">${rects}</g></svg>`
  );
}
