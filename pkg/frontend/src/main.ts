/** DOM wiring: canvas editor over frame 1, ab color wheel, colorize button,
 * status line, and the result scrubber. */

import { ApiClient, ScribbleRejectedError, SessionInfo } from "./api.js";
import { abToCss, NEUTRAL_AB, wheelToAb } from "./colors.js";
import { canvasToProcessing, processingToCanvas, ViewTransform } from "./mapping.js";
import { POINT_BUDGET, Stroke } from "./scribbles.js";
import { Scrubber } from "./scrubber.js";
import { EditorSession } from "./session.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("editor");
const wheel = el<HTMLCanvasElement>("wheel");
const budgetLabel = el<HTMLSpanElement>("budget");
const statusLabel = el<HTMLSpanElement>("status");
const colorizeBtn = el<HTMLButtonElement>("colorize");
const undoBtn = el<HTMLButtonElement>("undo");
const clearBtn = el<HTMLButtonElement>("clear");
const playBtn = el<HTMLButtonElement>("play");
const abToggleBtn = el<HTMLButtonElement>("ab-toggle");
const scrubberInput = el<HTMLInputElement>("scrubber");
const resultImg = el<HTMLImageElement>("result");
const fileInput = el<HTMLInputElement>("frames");
const srRatioSelect = el<HTMLSelectElement>("sr-ratio");
const flowSelect = el<HTMLSelectElement>("flow");

let session: SessionInfo | null = null;
let editor: EditorSession | null = null;
let scrubber: Scrubber | null = null;
let view: ViewTransform | null = null;
let currentColor = { a: NEUTRAL_AB + 0.2, b: NEUTRAL_AB + 0.1 };
let frameImage: HTMLImageElement | null = null;
let highlighted: number[] = [];

function drawWheel() {
  const ctx = wheel.getContext("2d")!;
  const size = wheel.width;
  const img = ctx.createImageData(size, size);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const u = (2 * x) / size - 1;
      const v = (2 * y) / size - 1;
      const idx = 4 * (y * size + x);
      if (Math.hypot(u, v) > 1) {
        img.data[idx + 3] = 0;
        continue;
      }
      const { a, b } = wheelToAb(u, v);
      const css = abToCss(a, b);
      const m = css.match(/rgb\((\d+), (\d+), (\d+)\)/)!;
      img.data[idx] = Number(m[1]);
      img.data[idx + 1] = Number(m[2]);
      img.data[idx + 2] = Number(m[3]);
      img.data[idx + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
}

function redrawEditor() {
  if (!editor || !view) return;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (frameImage) ctx.drawImage(frameImage, 0, 0, canvas.width, canvas.height);
  const points = editor.serialize().points;
  points.forEach((p, idx) => {
    const { x, y } = processingToCanvas(view!, p.x, p.y);
    ctx.fillStyle = abToCss(p.a, p.b);
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
    if (highlighted.includes(idx)) {
      ctx.strokeStyle = "red";
      ctx.lineWidth = 3;
      ctx.stroke();
    }
  });
  budgetLabel.textContent = `${points.length} / ${POINT_BUDGET} points`;
  colorizeBtn.disabled = !editor.canColorize;
  colorizeBtn.textContent = editor.resultsStale ? "Colorize" : "Colorize (up to date)";
}

function showResultFrame() {
  if (!session || !scrubber || !editor) return;
  scrubberInput.value = String(scrubber.frame);
  resultImg.src =
    scrubber.showOriginal || editor.resultsStale
      ? api.frameUrl(session.id, scrubber.frame)
      : api.resultUrl(session.id, scrubber.frame, editor.resultVersion);
}

fileInput.addEventListener("change", async () => {
  const files = Array.from(fileInput.files ?? []);
  if (files.length === 0) return;
  session = await api.createSessionFromFiles(files);
  const ratio = Number(srRatioSelect.value);
  const [fullH, fullW] = session.resolution;
  editor = new EditorSession(fullH / ratio, fullW / ratio);
  view = {
    processingWidth: fullW / ratio,
    processingHeight: fullH / ratio,
    canvasWidth: canvas.width,
    canvasHeight: canvas.height,
  };
  scrubber = new Scrubber(session.n_frames, showResultFrame);
  scrubberInput.max = String(session.n_frames - 1);
  frameImage = new Image();
  frameImage.onload = redrawEditor;
  frameImage.src = api.frameUrl(session.id, 0);
  statusLabel.textContent = `session ${session.id}: ${session.n_frames} frames`;
});

let activeStroke: Stroke | null = null;

canvas.addEventListener("pointerdown", (ev) => {
  if (!editor || !view) return;
  const rect = canvas.getBoundingClientRect();
  const p = canvasToProcessing(view, ev.clientX - rect.left, ev.clientY - rect.top);
  activeStroke = { points: [p], color: { ...currentColor }, radius: 2 };
});

canvas.addEventListener("pointermove", (ev) => {
  if (!activeStroke || !view) return;
  const rect = canvas.getBoundingClientRect();
  activeStroke.points.push(canvasToProcessing(view, ev.clientX - rect.left, ev.clientY - rect.top));
});

canvas.addEventListener("pointerup", () => {
  if (!editor || !activeStroke) return;
  editor.addStroke(activeStroke);
  activeStroke = null;
  highlighted = [];
  redrawEditor();
});

wheel.addEventListener("pointerdown", (ev) => {
  const rect = wheel.getBoundingClientRect();
  const u = (2 * (ev.clientX - rect.left)) / wheel.width - 1;
  const v = (2 * (ev.clientY - rect.top)) / wheel.height - 1;
  currentColor = wheelToAb(u, v);
  el<HTMLSpanElement>("swatch").style.background = abToCss(currentColor.a, currentColor.b);
});

undoBtn.addEventListener("click", () => {
  if (editor?.undo()) {
    highlighted = [];
    redrawEditor();
  }
});

clearBtn.addEventListener("click", () => {
  editor?.clear();
  highlighted = [];
  redrawEditor();
});

colorizeBtn.addEventListener("click", async () => {
  if (!session || !editor) return;
  highlighted = [];
  try {
    const version = await api.putScribbles(session.id, editor.serialize());
    editor.markRunning();
    redrawEditor();
    await api.colorize(session.id, Number(srRatioSelect.value), flowSelect.value);
    const status = await api.waitForResult(session.id, (s) => {
      statusLabel.textContent = `${s.status}: ${s.frames_done}/${s.n_frames}`;
    });
    if (status.status === "done") {
      editor.markResults(version, status.n_frames);
      scrubber = new Scrubber(status.n_frames, showResultFrame);
      showResultFrame();
    } else {
      statusLabel.textContent = "colorization failed";
      editor.phase = "editing";
    }
  } catch (err) {
    if (err instanceof ScribbleRejectedError) {
      highlighted = err.pointErrors.map((e) => e.index);
      statusLabel.textContent = err.message;
    } else {
      statusLabel.textContent = String(err);
    }
    editor.phase = "editing";
  }
  redrawEditor();
});

scrubberInput.addEventListener("input", () => scrubber?.seek(Number(scrubberInput.value)));
playBtn.addEventListener("click", () => {
  if (!scrubber) return;
  if (scrubber.playing) {
    scrubber.pause();
    playBtn.textContent = "Play";
  } else {
    scrubber.play();
    playBtn.textContent = "Pause";
  }
});
abToggleBtn.addEventListener("click", () => scrubber?.toggleOriginal());

setInterval(() => {
  scrubber?.tick();
}, 125);

drawWheel();
