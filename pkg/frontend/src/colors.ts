/**
 * Practice-mode color mapping, shared by the heatmap and its legend.
 * Yellow marks pitch practice, purple timing practice.
 */

export const MODE_COLORS: Record<string, string> = {
  IMP_TIMING: "#440154",
  IMP_PITCH: "#fde725",
};

export function modeColor(mode: string): string {
  const color = MODE_COLORS[mode];
  if (color === undefined) {
    throw new Error(`unknown practice mode: ${mode}`);
  }
  return color;
}

/** 0 = IMP_TIMING, 1 = IMP_PITCH, matching the server's dense grid codes. */
export function modeCodeColor(code: number): string {
  if (code === 0) return MODE_COLORS.IMP_TIMING;
  if (code === 1) return MODE_COLORS.IMP_PITCH;
  throw new Error(`unknown practice mode code: ${code}`);
}
