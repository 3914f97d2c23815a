/** Pure viewer state: box snapping/validation, restore history, and the
 *  running FLOPs-saved counter. No DOM access here so it is unit-testable. */

import type { Box, RoiResult, SessionInfo } from "./api.js";

export const MIN_BOX = 8;

/** Snap a raw drag rectangle to even integer pixels, clamped inside the
 *  image. Even snapping keeps the attention downsampler divisible. */
export function snapBox(raw: Box, imageH: number, imageW: number): Box {
  const even = (v: number) => 2 * Math.round(v / 2);
  let top = even(raw.top);
  let left = even(raw.left);
  let height = Math.max(MIN_BOX, even(raw.height));
  let width = Math.max(MIN_BOX, even(raw.width));
  height = Math.min(height, even(imageH));
  width = Math.min(width, even(imageW));
  top = Math.min(Math.max(top, 0), imageH - height);
  left = Math.min(Math.max(left, 0), imageW - width);
  return { top, left, height, width };
}

/** A drag is usable once it spans at least the minimum box in each
 *  dimension and lies inside the image. */
export function validBox(box: Box, imageH: number, imageW: number): boolean {
  return (
    box.height >= MIN_BOX &&
    box.width >= MIN_BOX &&
    box.top >= 0 &&
    box.left >= 0 &&
    box.top + box.height <= imageH &&
    box.left + box.width <= imageW
  );
}

export interface HistoryEntry {
  box: Box;
  srPngB64: string;
  roiGflops: number;
  scale: number;
  elapsedMs: number;
}

export class ViewerState {
  readonly history: HistoryEntry[] = [];
  private roiGflopsSpent = 0;
  private postEstimateTotal = 0;

  constructor(readonly session: SessionInfo) {}

  get imageHeight(): number {
    return this.session.height;
  }

  get imageWidth(): number {
    return this.session.width;
  }

  recordRestore(box: Box, result: RoiResult): HistoryEntry {
    const entry: HistoryEntry = {
      box,
      srPngB64: result.sr_png_b64,
      roiGflops: result.roi_gflops,
      scale: result.scale,
      elapsedMs: result.elapsed_ms,
    };
    this.history.push(entry); // append-only
    this.roiGflopsSpent += result.roi_gflops;
    this.postEstimateTotal += this.session.post_gflops;
    return entry;
  }

  /** What the post-cropping strategy would have cost so far, minus what the
   *  session actually spent (one-time context + per-ROI increments). */
  get savedGflops(): number {
    return this.postEstimateTotal - (this.session.context_gflops + this.roiGflopsSpent);
  }

  get spentGflops(): number {
    return this.session.context_gflops + this.roiGflopsSpent;
  }
}

/** Serializes restore requests: one in flight, later drags coalesce to the
 *  most recent one. */
export class RestoreQueue {
  private inFlight = false;
  private pending: Box | null = null;

  constructor(private readonly run: (box: Box) => Promise<void>) {}

  async submit(box: Box): Promise<void> {
    if (this.inFlight) {
      this.pending = box; // coalesce: only the latest queued drag survives
      return;
    }
    this.inFlight = true;
    try {
      await this.run(box);
    } finally {
      this.inFlight = false;
    }
    const next = this.pending;
    this.pending = null;
    if (next) await this.submit(next);
  }

  get busy(): boolean {
    return this.inFlight;
  }
}
