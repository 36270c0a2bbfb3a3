/** Thin typed client for the colorization service. Fetch is injectable so
 * tests can mock the server. */

import type { ScribblePayload } from "./scribbles.js";

export interface SessionInfo {
  id: string;
  n_frames: number;
  resolution: [number, number];
}

export interface Status {
  status: "idle" | "running" | "done" | "failed";
  progress: number;
  frames_done: number;
  n_frames: number;
  version: number;
}

export interface PointError {
  index: number;
  message: string;
}

export class ScribbleRejectedError extends Error {
  pointErrors: PointError[];
  constructor(message: string, pointErrors: PointError[]) {
    super(message);
    this.pointErrors = pointErrors;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async createSessionFromFiles(files: Blob[]): Promise<SessionInfo> {
    const form = new FormData();
    for (const file of files) form.append("frames", file);
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions`, { method: "POST", body: form });
    if (!resp.ok) throw new Error(`session create failed: ${resp.status}`);
    return (await resp.json()) as SessionInfo;
  }

  async createSessionFromClipDir(clipDir: string): Promise<SessionInfo> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ clip_dir: clipDir }),
    });
    if (!resp.ok) throw new Error(`session create failed: ${resp.status}`);
    return (await resp.json()) as SessionInfo;
  }

  frameUrl(sessionId: string, t: number): string {
    return `${this.baseUrl}/sessions/${sessionId}/frame/${t}`;
  }

  resultUrl(sessionId: string, t: number, version: number): string {
    // version is a cache-buster; the server never serves stale frames anyway
    return `${this.baseUrl}/sessions/${sessionId}/result/${t}?v=${version}`;
  }

  async putScribbles(sessionId: string, payload: ScribblePayload): Promise<number> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/scribbles`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (resp.status === 422) {
      const body = (await resp.json()) as { detail: string; point_errors?: PointError[] };
      throw new ScribbleRejectedError(body.detail, body.point_errors ?? []);
    }
    if (!resp.ok) throw new Error(`scribble upload failed: ${resp.status}`);
    const body = (await resp.json()) as { version: number };
    return body.version;
  }

  async colorize(sessionId: string, srRatio: number, flow: string): Promise<void> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}/colorize?sr_ratio=${srRatio}&flow=${flow}`,
      { method: "POST" },
    );
    if (resp.status === 409) throw new Error("a colorization is already running");
    if (!resp.ok) throw new Error(`colorize failed: ${resp.status}`);
  }

  async status(sessionId: string): Promise<Status> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/status`);
    if (!resp.ok) throw new Error(`status failed: ${resp.status}`);
    return (await resp.json()) as Status;
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`, { method: "DELETE" });
  }

  /** Poll status with linear backoff until done/failed. */
  async waitForResult(
    sessionId: string,
    onProgress?: (status: Status) => void,
    sleep: (ms: number) => Promise<void> = (ms) => new Promise((res) => setTimeout(res, ms)),
  ): Promise<Status> {
    let delay = 150;
    for (;;) {
      const status = await this.status(sessionId);
      onProgress?.(status);
      if (status.status === "done" || status.status === "failed") return status;
      await sleep(delay);
      delay = Math.min(delay + 100, 1500);
    }
  }
}
