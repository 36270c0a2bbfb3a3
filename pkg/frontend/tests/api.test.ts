import { describe, expect, it } from "vitest";

import { ApiClient, ScribbleRejectedError, Status } from "../src/api.js";
import { serializeScribbles, validatePayload } from "../src/scribbles.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Minimal mock of the colorization service. */
function mockServer() {
  const calls: string[] = [];
  let version = 0;
  let polls = 0;
  let lastPayload: unknown = null;
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    calls.push(`${method} ${url}`);
    if (url.endsWith("/sessions") && method === "POST") {
      return jsonResponse({ id: "abc", n_frames: 5, resolution: [128, 224] }, 201);
    }
    if (url.includes("/scribbles")) {
      lastPayload = JSON.parse(String(init?.body));
      const payload = lastPayload as { points: Array<{ x: number }> };
      if (payload.points.some((p) => p.x > 1000)) {
        return jsonResponse(
          { detail: "point 1: outside", point_errors: [{ index: 1, message: "outside" }] },
          422,
        );
      }
      version += 1;
      return jsonResponse({ ok: true, version });
    }
    if (url.includes("/colorize")) {
      polls = 0;
      return jsonResponse({ status: "running", version }, 202);
    }
    if (url.includes("/status")) {
      polls += 1;
      const done = polls >= 3;
      const status: Status = {
        status: done ? "done" : "running",
        progress: done ? 1 : polls / 3,
        frames_done: done ? 5 : polls,
        n_frames: 5,
        version,
      };
      return jsonResponse(status);
    }
    return new Response("not found", { status: 404 });
  };
  return { fetchImpl, calls, payload: () => lastPayload };
}

describe("api client round trip", () => {
  it("uploads scribbles, starts colorize, and polls to completion", async () => {
    const server = mockServer();
    const client = new ApiClient("", server.fetchImpl);
    const payload = serializeScribbles(
      [{ points: [{ x: 3, y: 4 }], color: { a: 0.6, b: 0.4 }, radius: 2 }],
      64,
      112,
    );
    expect(validatePayload(payload)).toBeNull();

    const version = await client.putScribbles("abc", payload);
    expect(version).toBe(1);
    await client.colorize("abc", 2, "zero");

    const seen: number[] = [];
    const status = await client.waitForResult(
      "abc",
      (s) => seen.push(s.progress),
      async () => {},
    );
    expect(status.status).toBe("done");
    // progress is monotone during a run
    for (let i = 1; i < seen.length; i++) expect(seen[i]).toBeGreaterThanOrEqual(seen[i - 1]);
    // the payload that went over the wire is exactly the serialized one
    expect(server.payload()).toEqual(JSON.parse(JSON.stringify(payload)));
  });

  it("surfaces 422 rejections with the offending point index", async () => {
    const server = mockServer();
    const client = new ApiClient("", server.fetchImpl);
    const payload = serializeScribbles(
      [{ points: [{ x: 3, y: 4 }], color: { a: 0.6, b: 0.4 }, radius: 2 }],
      64,
      112,
    );
    payload.points.push({ x: 5000, y: 0, a: 0.5, b: 0.5 });
    let caught: ScribbleRejectedError | null = null;
    try {
      await client.putScribbles("abc", payload);
    } catch (err) {
      caught = err as ScribbleRejectedError;
    }
    expect(caught).not.toBeNull();
    expect(caught!.pointErrors[0].index).toBe(1);
  });

  it("builds cache-busted result URLs", () => {
    const client = new ApiClient("");
    expect(client.resultUrl("abc", 3, 7)).toBe("/sessions/abc/result/3?v=7");
  });
});
