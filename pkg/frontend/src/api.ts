/** Typed client for the clsr session service. All numbers shown in the UI
 *  come verbatim from these responses; the client never recomputes model
 *  math. */

export interface SessionInfo {
  session_id: string;
  height: number;
  width: number;
  context_gflops: number;
  post_gflops: number;
}

export interface RoiResult {
  sr_png_b64: string;
  roi_gflops: number;
  elapsed_ms: number;
  scale: number;
}

export interface Box {
  top: number;
  left: number;
  height: number;
  width: number;
}

export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function parseOrThrow<T>(resp: Response): Promise<T> {
  if (resp.ok) {
    return (await resp.json()) as T;
  }
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body: keep the status text */
  }
  throw new ServiceError(resp.status, detail);
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async createSession(imagePngB64: string): Promise<SessionInfo> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_png_b64: imagePngB64 }),
    });
    return parseOrThrow<SessionInfo>(resp);
  }

  async restoreRoi(sessionId: string, box: Box, pad?: number): Promise<RoiResult> {
    const payload: Record<string, number> = { ...box };
    if (pad !== undefined) payload.pad = pad;
    const resp = await this.fetchFn(`${this.baseUrl}/v1/sessions/${sessionId}/roi`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return parseOrThrow<RoiResult>(resp);
  }

  async dropSession(sessionId: string): Promise<void> {
    await this.fetchFn(`${this.baseUrl}/v1/sessions/${sessionId}`, { method: "DELETE" });
  }
}
