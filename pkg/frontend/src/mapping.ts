/** Canvas-to-processing coordinate mapping.
 *
 * The server consumes scribble coordinates at the processing resolution; the
 * canvas displays the first frame scaled up. Both directions round to the
 * nearest pixel center so a round trip never drifts more than one pixel.
 */

export interface ViewTransform {
  processingWidth: number;
  processingHeight: number;
  canvasWidth: number;
  canvasHeight: number;
}

export function canvasToProcessing(
  view: ViewTransform,
  cx: number,
  cy: number,
): { x: number; y: number } {
  const x = Math.round(((cx + 0.5) * view.processingWidth) / view.canvasWidth - 0.5);
  const y = Math.round(((cy + 0.5) * view.processingHeight) / view.canvasHeight - 0.5);
  return {
    x: Math.min(view.processingWidth - 1, Math.max(0, x)),
    y: Math.min(view.processingHeight - 1, Math.max(0, y)),
  };
}

export function processingToCanvas(
  view: ViewTransform,
  px: number,
  py: number,
): { x: number; y: number } {
  return {
    x: Math.round(((px + 0.5) * view.canvasWidth) / view.processingWidth - 0.5),
    y: Math.round(((py + 0.5) * view.canvasHeight) / view.processingHeight - 0.5),
  };
}
