/** Application wiring: gallery, editor (canvas + tree), and sketch mode. */

import { ApiClient, uiMessageFor } from "./api.js";
import { drawScene, type SceneView } from "./canvas.js";
import {
  addBox,
  buildLayoutDoc,
  emptySketch,
  removeBox,
  rotateBox,
  type SketchState,
} from "./sketch.js";
import { renderTreePanel } from "./treepanel.js";
import {
  currentRelpos,
  leafIdsAt,
  nodeAtPath,
  pathOfObject,
  placementObjectIds,
} from "./treeutil.js";
import { findRestoreDonor, UndoManager } from "./undo.js";
import type { CandidateDoc, ScenePayload } from "./types.js";

const api = new ApiClient("");
const undo = new UndoManager();

interface AppState {
  active: ScenePayload | null;
  selectedPath: number[] | null;
  mode: "browse" | "sketch" | "edit";
  candidates: CandidateDoc[];
  sketch: SketchState;
  view: SceneView | null;
}

const state: AppState = {
  active: null,
  selectedPath: null,
  mode: "browse",
  candidates: [],
  sketch: emptySketch(),
  view: null,
};

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function setStatus(message: string, isError = false): void {
  const bar = el<HTMLElement>("status");
  bar.textContent = message;
  bar.classList.toggle("error", isError);
}

function report(err: unknown): void {
  setStatus(uiMessageFor(err), true);
}

// --- gallery --------------------------------------------------------------

async function refreshGallery(): Promise<void> {
  const list = await api.listScenes();
  const gallery = el<HTMLElement>("gallery");
  gallery.textContent = "";
  for (const summary of list) {
    const card = document.createElement("div");
    card.className = "card";
    if (state.active?.id === summary.id) card.classList.add("active");
    const img = document.createElement("img");
    // cache-bust on revision so edits refresh the thumbnail
    img.src = `${api.renderUrl(summary.id)}?rev=${summary.revision}`;
    img.alt = summary.id;
    const caption = document.createElement("div");
    caption.className = "caption";
    caption.textContent =
      `${summary.id} · ${summary.objects} objects · ` +
      `${summary.room.width.toFixed(1)}×${summary.room.depth.toFixed(1)} m`;
    card.append(img, caption);
    card.addEventListener("click", () => void openScene(summary.id));
    gallery.append(card);
  }
}

// --- editor ---------------------------------------------------------------

function highlightedIds(): Set<string> {
  if (!state.active || !state.selectedPath) return new Set();
  try {
    return new Set(leafIdsAt(state.active.scene.tree.root, state.selectedPath));
  } catch {
    return new Set();
  }
}

function redrawEditor(): void {
  const canvas = el<HTMLCanvasElement>("topview");
  if (!state.active) {
    canvas.getContext("2d")?.clearRect(0, 0, canvas.width, canvas.height);
    el<HTMLElement>("tree").textContent = "no scene loaded";
    return;
  }
  const { scene } = state.active;
  state.view = drawScene(
    canvas,
    scene,
    highlightedIds(),
    placementObjectIds(scene.tree.root),
  );
  renderTreePanel(el<HTMLElement>("tree"), scene.tree.root, state.selectedPath, (path) => {
    state.selectedPath = path;
    redrawEditor();
  });
  el<HTMLElement>("scene-title").textContent =
    `${state.active.id} (revision ${state.active.revision})`;
  el<HTMLButtonElement>("btn-undo").disabled = !undo.canUndo;
}

async function openScene(id: string): Promise<void> {
  try {
    state.active = await api.getScene(id);
    state.selectedPath = null;
    state.candidates = [];
    undo.clear();
    setStatus(`loaded ${id}`);
    redrawEditor();
    await refreshGallery();
  } catch (err) {
    report(err);
  }
}

/** Re-fetch the active scene after an edit or a conflict. */
async function reloadActive(): Promise<void> {
  if (!state.active) return;
  const id = state.active.id;
  state.active = await api.getScene(id);
  // keep the selection only if the path still resolves
  if (state.selectedPath) {
    try {
      nodeAtPath(state.active.scene.tree.root, state.selectedPath);
    } catch {
      state.selectedPath = null;
    }
  }
  redrawEditor();
  await refreshGallery();
}

function applyEdited(payload: ScenePayload): void {
  state.active = payload;
  if (state.selectedPath) {
    try {
      nodeAtPath(payload.scene.tree.root, state.selectedPath);
    } catch {
      state.selectedPath = null;
    }
  }
  redrawEditor();
  void refreshGallery();
}

async function onDelete(): Promise<void> {
  if (!state.active || !state.selectedPath) return;
  try {
    const payload = await api.deleteSubtree(
      state.active.id,
      state.selectedPath,
      state.active.revision,
    );
    undo.recordDelete();
    state.selectedPath = null;
    applyEdited(payload);
    setStatus("subtree deleted (not undoable)");
  } catch (err) {
    report(err);
  }
}

async function onNudge(dx: number, dy: number): Promise<void> {
  if (!state.active || !state.selectedPath) return;
  const root = state.active.scene.tree.root;
  const relpos = currentRelpos(root, state.selectedPath);
  if (!relpos) {
    setStatus("reference children cannot be moved", true);
    return;
  }
  const nudged = [...relpos];
  nudged[1] += dx; // horizontal offset along the reference frame
  nudged[2] += dy; // vertical offset
  try {
    undo.recordMove(root, state.selectedPath);
    const payload = await api.moveSubtree(
      state.active.id,
      state.selectedPath,
      state.active.revision,
      nudged,
    );
    applyEdited(payload);
    setStatus("subtree moved");
  } catch (err) {
    report(err);
  }
}

async function onShowCandidates(): Promise<void> {
  if (!state.active || !state.selectedPath) return;
  try {
    state.candidates = await api.candidates(state.active.id, state.selectedPath, 8);
    const drawer = el<HTMLElement>("candidates");
    drawer.textContent = "";
    for (const c of state.candidates) {
      const row = document.createElement("button");
      row.className = "candidate";
      row.textContent =
        `${c.donor_scene_id}@${c.donor_path} · score ${c.score.toFixed(3)} · ` +
        c.categories.join(", ");
      row.addEventListener("click", () => void onReplace(c));
      drawer.append(row);
    }
    setStatus(`${state.candidates.length} candidate subtrees`);
  } catch (err) {
    report(err);
  }
}

async function onReplace(candidate: CandidateDoc): Promise<void> {
  if (!state.active || !state.selectedPath) return;
  try {
    const restore = findRestoreDonor(state.candidates, state.active.id);
    undo.recordReplace(state.selectedPath, restore);
    const payload = await api.replaceSubtree(
      state.active.id,
      state.selectedPath,
      state.active.revision,
      candidate.donor_scene_id,
      candidate.donor_path,
    );
    applyEdited(payload);
    setStatus(`replaced with ${candidate.donor_scene_id}@${candidate.donor_path}`);
  } catch (err) {
    report(err);
  }
}

async function onUndo(): Promise<void> {
  if (!state.active) return;
  try {
    const payload = await undo.undo(api, state.active.id, state.active.revision);
    applyEdited(payload);
    setStatus("undone");
  } catch (err) {
    report(err);
  }
}

// --- sketch mode ----------------------------------------------------------

function redrawSketch(): void {
  const canvas = el<HTMLCanvasElement>("sketchpad");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { roomWidth, roomDepth, boxes } = state.sketch;
  const scale = Math.min(
    (canvas.width - 40) / roomWidth,
    (canvas.height - 40) / roomDepth,
  );
  const toPx = (x: number, y: number): [number, number] => [
    canvas.width / 2 + x * scale,
    canvas.height / 2 - y * scale,
  ];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 2;
  const [rx, ry] = toPx(-roomWidth / 2, roomDepth / 2);
  ctx.strokeRect(rx, ry, roomWidth * scale, roomDepth * scale);
  boxes.forEach((b, i) => {
    ctx.save();
    const [px, py] = toPx(b.cx, b.cy);
    ctx.translate(px, py);
    ctx.rotate(-b.angle);
    ctx.fillStyle = "#4e79a766";
    ctx.strokeStyle = "#4e79a7";
    ctx.fillRect((-b.sx * scale) / 2, (-b.sy * scale) / 2, b.sx * scale, b.sy * scale);
    ctx.strokeRect((-b.sx * scale) / 2, (-b.sy * scale) / 2, b.sx * scale, b.sy * scale);
    ctx.restore();
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.fillText(String(i + 1), px - 3, py + 4);
  });
}

function wireSketch(): void {
  const canvas = el<HTMLCanvasElement>("sketchpad");
  let start: [number, number] | null = null;
  const toWorld = (ev: MouseEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    const { roomWidth, roomDepth } = state.sketch;
    const scale = Math.min(
      (canvas.width - 40) / roomWidth,
      (canvas.height - 40) / roomDepth,
    );
    return [
      (ev.clientX - rect.left - canvas.width / 2) / scale,
      (canvas.height / 2 - (ev.clientY - rect.top)) / scale,
    ];
  };
  canvas.addEventListener("mousedown", (ev) => {
    start = toWorld(ev);
  });
  canvas.addEventListener("mouseup", (ev) => {
    if (!start) return;
    const end = toWorld(ev);
    const sx = Math.abs(end[0] - start[0]);
    const sy = Math.abs(end[1] - start[1]);
    if (sx > 0.05 && sy > 0.05) {
      state.sketch = addBox(state.sketch, {
        cx: (start[0] + end[0]) / 2,
        cy: (start[1] + end[1]) / 2,
        sx,
        sy,
        angle: 0,
      });
      redrawSketch();
    }
    start = null;
  });
  el<HTMLButtonElement>("btn-sketch-clear").addEventListener("click", () => {
    state.sketch = emptySketch(state.sketch.roomWidth, state.sketch.roomDepth);
    redrawSketch();
  });
  el<HTMLButtonElement>("btn-sketch-rotate").addEventListener("click", () => {
    if (state.sketch.boxes.length > 0) {
      state.sketch = rotateBox(state.sketch, state.sketch.boxes.length - 1);
      redrawSketch();
    }
  });
  el<HTMLButtonElement>("btn-sketch-undo").addEventListener("click", () => {
    if (state.sketch.boxes.length > 0) {
      state.sketch = removeBox(state.sketch, state.sketch.boxes.length - 1);
      redrawSketch();
    }
  });
  el<HTMLButtonElement>("btn-sketch-submit").addEventListener("click", () => {
    void (async () => {
      const n = Number.parseInt(el<HTMLInputElement>("sketch-n").value, 10) || 4;
      try {
        setStatus("generating from sketch…");
        const scenes = await api.layoutToScenes(buildLayoutDoc(state.sketch), n);
        const strip = el<HTMLElement>("sketch-results");
        strip.textContent = "";
        for (const s of scenes) {
          const img = document.createElement("img");
          img.src = `${api.renderUrl(s.id)}?rev=${s.revision}`;
          img.alt = s.id;
          img.addEventListener("click", () => void openScene(s.id));
          strip.append(img);
        }
        setStatus(`${scenes.length} scenes from sketch`);
        await refreshGallery();
      } catch (err) {
        report(err);
      }
    })();
  });
}

// --- mode switching and boot ----------------------------------------------

function setMode(mode: AppState["mode"]): void {
  state.mode = mode;
  document.body.dataset.mode = mode;
  for (const m of ["browse", "sketch", "edit"] as const) {
    el<HTMLButtonElement>(`mode-${m}`).classList.toggle("on", m === mode);
  }
  if (mode === "sketch") redrawSketch();
  else redrawEditor();
}

function wireEditor(): void {
  const canvas = el<HTMLCanvasElement>("topview");
  canvas.addEventListener("click", (ev) => {
    if (!state.active || !state.view) return;
    const rect = canvas.getBoundingClientRect();
    const hit = state.view.hitTest(ev.clientX - rect.left, ev.clientY - rect.top);
    if (hit === null) {
      state.selectedPath = null;
    } else {
      const ids = placementObjectIds(state.active.scene.tree.root);
      state.selectedPath = pathOfObject(state.active.scene.tree.root, ids[hit]);
    }
    redrawEditor();
  });
  el<HTMLButtonElement>("btn-delete").addEventListener("click", () => void onDelete());
  el<HTMLButtonElement>("btn-candidates").addEventListener("click", () => void onShowCandidates());
  el<HTMLButtonElement>("btn-undo").addEventListener("click", () => void onUndo());
  el<HTMLButtonElement>("btn-reload").addEventListener("click", () => {
    void reloadActive().catch(report);
  });
  const nudges: [string, number, number][] = [
    ["btn-left", -0.1, 0],
    ["btn-right", 0.1, 0],
    ["btn-up", 0, 0.1],
    ["btn-down", 0, -0.1],
  ];
  for (const [id, dx, dy] of nudges) {
    el<HTMLButtonElement>(id).addEventListener("click", () => void onNudge(dx, dy));
  }
}

async function boot(): Promise<void> {
  try {
    const health = await api.health();
    setStatus(`service up · ${health.vocabulary.length} categories`);
  } catch (err) {
    report(err);
    return;
  }
  for (const m of ["browse", "sketch", "edit"] as const) {
    el<HTMLButtonElement>(`mode-${m}`).addEventListener("click", () => setMode(m));
  }
  el<HTMLButtonElement>("btn-generate").addEventListener("click", () => {
    void (async () => {
      try {
        setStatus("generating…");
        const scenes = await api.generate(4);
        setStatus(`generated ${scenes.map((s) => s.id).join(", ")}`);
        await refreshGallery();
      } catch (err) {
        report(err);
      }
    })();
  });
  wireEditor();
  wireSketch();
  setMode("browse");
  await refreshGallery();
}

document.addEventListener("DOMContentLoaded", () => void boot());
