/** Orchestrates upload / drag / restore flows against injected rendering and
 *  service interfaces, so the whole interaction logic runs headless in tests. */

import { Box, RoiResult, ServiceClient, ServiceError, SessionInfo } from "./api.js";
import { HistoryEntry, RestoreQueue, ViewerState, snapBox, validBox } from "./state.js";

export interface Renderer {
  showSession(info: SessionInfo): void;
  /** Display one restored crop: CSS size is scale x box at 1:1 device pixels. */
  showResult(entry: HistoryEntry, displayWidth: number, displayHeight: number, saved: number): void;
  showError(message: string): void;
}

export class ViewerController {
  state: ViewerState | null = null;
  private queue: RestoreQueue;

  constructor(
    private readonly client: ServiceClient,
    private readonly renderer: Renderer,
  ) {
    this.queue = new RestoreQueue((box) => this.restore(box));
  }

  async open(imagePngB64: string): Promise<void> {
    try {
      const info = await this.client.createSession(imagePngB64);
      this.state = new ViewerState(info);
      this.renderer.showSession(info);
    } catch (e) {
      this.renderer.showError(e instanceof ServiceError ? e.message : String(e));
      throw e;
    }
  }

  /** Snap the raw drag rectangle; returns null when it cannot become a valid box. */
  prepareBox(raw: Box): Box | null {
    if (!this.state) return null;
    if (raw.height < 1 || raw.width < 1) return null;
    const box = snapBox(raw, this.state.imageHeight, this.state.imageWidth);
    return validBox(box, this.state.imageHeight, this.state.imageWidth) ? box : null;
  }

  /** Entry point for a finished drag. Invalid rectangles never reach the wire. */
  async dragSelect(raw: Box): Promise<void> {
    const box = this.prepareBox(raw);
    if (!box) return;
    await this.queue.submit(box);
  }

  private async restore(box: Box): Promise<void> {
    if (!this.state) return;
    try {
      const result: RoiResult = await this.client.restoreRoi(this.state.session.session_id, box);
      const entry = this.state.recordRestore(box, result);
      this.renderer.showResult(
        entry,
        box.width * result.scale,
        box.height * result.scale,
        this.state.savedGflops,
      );
    } catch (e) {
      this.renderer.showError(e instanceof ServiceError ? e.message : String(e));
    }
  }

  /** Replay an old result from its cached thumbnail; no request is issued. */
  replay(index: number): void {
    if (!this.state) return;
    const entry = this.state.history[index];
    if (!entry) return;
    this.renderer.showResult(
      entry,
      entry.box.width * entry.scale,
      entry.box.height * entry.scale,
      this.state.savedGflops,
    );
  }
}
