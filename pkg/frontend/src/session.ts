/** Editor session state: stroke list with undo, point budget, staleness.
 *
 * Results are marked stale the moment any stroke edit lands; the Colorize
 * action re-enables and stale frames are dropped from the scrubber.
 */

import {
  POINT_BUDGET,
  ScribblePayload,
  serializeScribbles,
  Stroke,
  strokesToPoints,
} from "./scribbles.js";

export type EditorPhase = "editing" | "waiting" | "viewing";

export class EditorSession {
  strokes: Stroke[] = [];
  private undoStack: Stroke[][] = [];
  resultsStale = true;
  resultVersion = 0;
  resultFrames = 0;
  phase: EditorPhase = "editing";

  constructor(
    public processingHeight: number,
    public processingWidth: number,
  ) {}

  get pointCount(): number {
    return strokesToPoints(this.strokes).length;
  }

  get budgetRemaining(): number {
    return POINT_BUDGET - this.pointCount;
  }

  private beginEdit() {
    this.undoStack.push(this.strokes.map((s) => ({ ...s, points: [...s.points] })));
    this.resultsStale = true;
    this.phase = "editing";
  }

  addStroke(stroke: Stroke) {
    this.beginEdit();
    this.strokes.push(stroke);
  }

  eraseNear(x: number, y: number, radius = 4) {
    this.beginEdit();
    this.strokes = this.strokes.filter(
      (s) => !s.points.some((p) => Math.hypot(p.x - x, p.y - y) <= radius),
    );
  }

  clear() {
    this.beginEdit();
    this.strokes = [];
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (prev === undefined) return false;
    this.strokes = prev;
    this.resultsStale = true;
    this.phase = "editing";
    return true;
  }

  serialize(radius = 2): ScribblePayload {
    return serializeScribbles(this.strokes, this.processingHeight, this.processingWidth, radius);
  }

  markRunning() {
    this.phase = "waiting";
  }

  markResults(version: number, frames: number) {
    this.resultVersion = version;
    this.resultFrames = frames;
    this.resultsStale = false;
    this.phase = "viewing";
  }

  get canColorize(): boolean {
    return this.phase !== "waiting";
  }
}
