/** Canvas helpers: native-pixel image display, live drag rectangle, and the
 *  side-by-side result panel (model output vs plain bilinear zoom). */

import type { Box } from "./api.js";
import type { HistoryEntry } from "./state.js";

export function drawImageNative(canvas: HTMLCanvasElement, img: HTMLImageElement): void {
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(img, 0, 0);
}

export function drawDragRect(
  canvas: HTMLCanvasElement,
  img: HTMLImageElement,
  box: Box | null,
  committed: Box | null,
): void {
  drawImageNative(canvas, img);
  const ctx = canvas.getContext("2d")!;
  if (committed) {
    ctx.strokeStyle = "#3fa34d";
    ctx.lineWidth = 1;
    ctx.strokeRect(committed.left + 0.5, committed.top + 0.5, committed.width, committed.height);
  }
  if (box) {
    ctx.strokeStyle = "#e4572e";
    ctx.setLineDash([4, 3]);
    ctx.strokeRect(box.left + 0.5, box.top + 0.5, box.width, box.height);
    ctx.setLineDash([]);
  }
}

export function renderResultPair(
  srCanvas: HTMLCanvasElement,
  zoomCanvas: HTMLCanvasElement,
  source: HTMLImageElement,
  entry: HistoryEntry,
  displayW: number,
  displayH: number,
): Promise<void> {
  // model output at 1:1 device pixels
  const sr = new Image();
  const done = new Promise<void>((resolve, reject) => {
    sr.onload = () => {
      srCanvas.width = displayW;
      srCanvas.height = displayH;
      const ctx = srCanvas.getContext("2d")!;
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(sr, 0, 0);
      resolve();
    };
    sr.onerror = () => reject(new Error("failed to decode restored PNG"));
  });
  sr.src = `data:image/png;base64,${entry.srPngB64}`;

  // in-UI baseline: plain smoothed zoom of the same LR crop, no model call
  zoomCanvas.width = displayW;
  zoomCanvas.height = displayH;
  const zctx = zoomCanvas.getContext("2d")!;
  zctx.imageSmoothingEnabled = true;
  zctx.imageSmoothingQuality = "medium";
  zctx.drawImage(
    source,
    entry.box.left,
    entry.box.top,
    entry.box.width,
    entry.box.height,
    0,
    0,
    displayW,
    displayH,
  );
  return done;
}
