/**
 * DOM wiring for the scaffolding client: session controls, task
 * selectors, recommendation panel, observation form with optimistic
 * updates, policy heatmap, posterior surfaces, piano roll, autopilot.
 */

import { ScaffoldApi, ServerError } from "./api.js";
import type { ObservationBody, Recommendation } from "./api.js";
import { MODE_COLORS } from "./colors.js";
import { buildHeatmap, renderHeatmap } from "./heatmap.js";
import { rollSvg } from "./pianoroll.js";
import type { ScoreData } from "./pianoroll.js";
import { buildSurfaces, surfaceSvg } from "./posterior.js";
import {
  confirmAppend,
  freshView,
  optimisticAppend,
  recordAutopilotRow,
  rollbackAppend,
} from "./state.js";
import type { SessionView } from "./state.js";

const api = new ScaffoldApi("");
let view: SessionView | null = null;
let mutationInFlight = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

function currentTask(): { bpm: number; note_range: number } {
  const bpm = Number(el<HTMLInputElement>("bpm").value);
  const picker = document.querySelector<HTMLInputElement>("input[name=note-range]:checked");
  return { bpm, note_range: picker ? Number(picker.value) : 0 };
}

function setControlsEnabled(enabled: boolean): void {
  for (const id of ["submit-observation", "autopilot-step", "autopilot-run"]) {
    el<HTMLButtonElement>(id).disabled = !enabled || view === null;
  }
}

function renderView(): void {
  if (!view) return;
  el<HTMLSpanElement>("session-id").textContent = view.sessionId;
  el<HTMLSpanElement>("point-count").textContent = String(view.pointCount);
  const tbody = el<HTMLTableSectionElement>("history-body");
  tbody.innerHTML = "";
  for (const row of view.history) {
    const tr = document.createElement("tr");
    if (row.pending) tr.className = "pending";
    const utility = row.utility === null ? "…" : row.utility.toFixed(3);
    const cells = [
      String(row.index), String(row.bpm), String(row.noteRange), row.mode,
      Number.isNaN(row.preTiming) ? "-" : `${row.preTiming}/${row.prePitch}`,
      Number.isNaN(row.postTiming) ? "-" : `${row.postTiming}/${row.postPitch}`,
      utility,
    ];
    for (const text of cells) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
  setBanner(view.banner);
}

function renderRecommendation(rec: Recommendation): void {
  el<HTMLSpanElement>("rec-mode").textContent = rec.mode;
  el<HTMLSpanElement>("rec-mode").style.color =
    rec.mode === "IMP_PITCH" ? "#8a7a00" : MODE_COLORS.IMP_TIMING;
  const detail = Object.entries(rec.posteriors)
    .map(([mode, p]) => `${mode}: mean ${p.mean.toFixed(3)}, std ${p.std.toFixed(3)}`)
    .join("  |  ");
  el<HTMLSpanElement>("rec-detail").textContent = detail;
  const select = el<HTMLSelectElement>("obs-mode");
  select.value = rec.mode;
}

async function refreshGrids(): Promise<void> {
  if (!view) return;
  const policy = await api.policy(view.sessionId);
  renderHeatmap(el<HTMLCanvasElement>("heatmap"), buildHeatmap(policy));
  for (const mode of ["IMP_TIMING", "IMP_PITCH"]) {
    const surfaces = buildSurfaces(await api.posterior(view.sessionId, mode));
    el<HTMLDivElement>(`surface-${mode}-mean`).innerHTML =
      surfaceSvg(surfaces.mean, `${mode} posterior mean`);
    el<HTMLDivElement>(`surface-${mode}-std`).innerHTML =
      surfaceSvg(surfaces.std, `${mode} posterior std`);
  }
}

async function createSession(): Promise<void> {
  const autopilot = el<HTMLSelectElement>("autopilot-group").value || null;
  const seed = Number(el<HTMLInputElement>("seed").value) || 0;
  const meanUtility = el<HTMLInputElement>("mean-utility").value;
  const sim: Record<string, unknown> = {};
  if (meanUtility !== "") sim.mean_utility = Number(meanUtility);
  const summary = await api.createSession({ sim, autopilot, seed });
  view = freshView(summary.id);
  view = { ...view, pointCount: summary.point_count };
  el<HTMLSpanElement>("autopilot-label").textContent = summary.autopilot ?? "none";
  renderView();
  setControlsEnabled(true);
  el<HTMLButtonElement>("autopilot-step").disabled = summary.autopilot === null;
  el<HTMLButtonElement>("autopilot-run").disabled = summary.autopilot === null;
  await refreshGrids();
}

async function requestRecommendation(): Promise<void> {
  if (!view) return;
  const rec = await api.recommend(view.sessionId, currentTask());
  view = { ...view, lastRecommendation: rec };
  renderRecommendation(rec);
}

function observationFromForm(): ObservationBody {
  const task = currentTask();
  const num = (id: string) => Number(el<HTMLInputElement>(id).value);
  return {
    bpm: task.bpm,
    note_range: task.note_range,
    mode: el<HTMLSelectElement>("obs-mode").value,
    error_pre: { timing: num("pre-timing"), pitch: num("pre-pitch") },
    error_post: { timing: num("post-timing"), pitch: num("post-pitch") },
  };
}

async function submitObservation(): Promise<void> {
  if (!view || mutationInFlight) return;
  mutationInFlight = true;
  setControlsEnabled(false);
  const body = observationFromForm();
  view = optimisticAppend(view, body);
  renderView();
  try {
    const result = await api.observe(view.sessionId, body);
    view = confirmAppend(view, result);
  } catch (error) {
    const message = error instanceof ServerError ? error.message : String(error);
    view = rollbackAppend(view, message);
  } finally {
    mutationInFlight = false;
    setControlsEnabled(true);
  }
  renderView();
  await refreshGrids();
}

async function autopilotSteps(count: number): Promise<void> {
  if (!view || mutationInFlight) return;
  mutationInFlight = true;
  setControlsEnabled(false);
  try {
    for (let i = 0; i < count; i++) {
      const step = await api.autopilotStep(view.sessionId);
      view = recordAutopilotRow(view, step);
      renderView();
      await refreshGrids(); // live refresh per step
    }
  } catch (error) {
    const message = error instanceof ServerError ? error.message : String(error);
    view = { ...view!, banner: message };
    renderView();
  } finally {
    mutationInFlight = false;
    setControlsEnabled(true);
  }
}

function renderPastedScore(): void {
  const raw = el<HTMLTextAreaElement>("score-json").value;
  try {
    const score = JSON.parse(raw) as ScoreData;
    el<HTMLDivElement>("score-roll").innerHTML = rollSvg(score);
    setBanner(null);
  } catch (error) {
    setBanner(`score JSON not understood: ${error}`);
  }
}

function drawLegend(): void {
  const legend = el<HTMLDivElement>("legend");
  legend.innerHTML = Object.entries(MODE_COLORS)
    .map(
      ([mode, color]) =>
        `<span class="swatch" style="background:${color}"></span>${mode}&nbsp;&nbsp;`,
    )
    .join("");
}

export function boot(): void {
  drawLegend();
  setControlsEnabled(false);
  el<HTMLInputElement>("bpm").addEventListener("input", () => {
    el<HTMLSpanElement>("bpm-value").textContent = el<HTMLInputElement>("bpm").value;
  });
  el<HTMLButtonElement>("create-session").addEventListener("click", () => {
    createSession().catch((e) => setBanner(String(e)));
  });
  el<HTMLButtonElement>("get-recommendation").addEventListener("click", () => {
    requestRecommendation().catch((e) => setBanner(String(e)));
  });
  el<HTMLButtonElement>("submit-observation").addEventListener("click", () => {
    void submitObservation();
  });
  el<HTMLButtonElement>("autopilot-step").addEventListener("click", () => {
    void autopilotSteps(1);
  });
  el<HTMLButtonElement>("autopilot-run").addEventListener("click", () => {
    const n = Number(el<HTMLInputElement>("autopilot-n").value) || 10;
    void autopilotSteps(n);
  });
  el<HTMLButtonElement>("render-score").addEventListener("click", renderPastedScore);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
