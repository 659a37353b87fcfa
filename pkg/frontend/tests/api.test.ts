import { describe, expect, it } from "vitest";

import { ApiError, OfflineError, StudioClient } from "../src/api.js";

const PNG_BYTES = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 1, 2, 3]);

interface Call {
  url: string;
  method: string;
  body: unknown;
  headers: Record<string, string>;
}

/** Queue-backed fetch stub that records every request it serves. */
function fakeFetch(responses: Response[]) {
  const calls: Call[] = [];
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url: input,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : null,
      headers: Object.fromEntries(
        Object.entries((init?.headers as Record<string, string>) ?? {}),
      ),
    });
    const next = responses.shift();
    if (!next) throw new Error("fetch stub exhausted");
    return next;
  };
  return { impl, calls };
}

function json(doc: unknown, status = 200, headers: Record<string, string> = {}): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "content-type": "application/json", ...headers },
  });
}

function png(headers: Record<string, string> = {}): Response {
  return new Response(PNG_BYTES, {
    status: 200,
    headers: { "content-type": "image/png", ...headers },
  });
}

describe("StudioClient requests", () => {
  it("lists problems via GET /v1/problems", async () => {
    const doc = { problems: [{ id: "p1", statement: "s", objects: ["original", "A"] }],
                  count: 1, checksum: "c" };
    const { impl, calls } = fakeFetch([json(doc)]);
    const client = new StudioClient("", impl);
    const listing = await client.listProblems();
    expect(calls[0]).toMatchObject({ url: "/v1/problems", method: "GET" });
    expect(listing.count).toBe(1);
    expect(listing.problems[0]?.id).toBe("p1");
  });

  it("creates sessions with a JSON body and parses the summary", async () => {
    const summary = {
      session_id: "s1", problem_id: "p1", status: "live", iteration_count: 0,
      next_iteration: 1, final_answer: null,
      config: { min_iterations: 5, max_iterations: 25, reset_enabled: true,
                allow_original_target: true, hint_360: false },
    };
    const { impl, calls } = fakeFetch([json(summary, 201)]);
    const client = new StudioClient("", impl);
    const info = await client.createSession({ problem_id: "p1", condition: "C1-reset" });
    expect(calls[0]?.url).toBe("/v1/sessions");
    expect(calls[0]?.method).toBe("POST");
    expect(calls[0]?.headers["content-type"]).toBe("application/json");
    expect(calls[0]?.body).toEqual({ problem_id: "p1", condition: "C1-reset" });
    expect(info.session_id).toBe("s1");
    expect(info.config.min_iterations).toBe(5);
  });

  it("returns the PNG and reads iteration headers from the commands endpoint", async () => {
    const { impl, calls } = fakeFetch([
      png({ "x-iteration": "3", "x-session-status": "live" }),
    ]);
    const client = new StudioClient("", impl);
    const result = await client.sendCommands("s1", "A", "left:30,up:15");
    expect(calls[0]?.url).toBe("/v1/sessions/s1/commands");
    expect(calls[0]?.body).toEqual({ target: "A", sequence: "left:30,up:15" });
    expect(result.iteration).toBe(3);
    expect(result.status).toBe("live");
    expect(result.png.size).toBe(PNG_BYTES.length);
  });

  it("prefixes every path with the configured base", () => {
    const client = new StudioClient("http://studio:8000");
    expect(client.problemImagePath("p1")).toBe("http://studio:8000/v1/problems/p1/image");
    expect(client.tilePath("p1", "B")).toBe("http://studio:8000/v1/problems/p1/tiles/B");
    expect(client.snapshotPath("s1", "A"))
      .toBe("http://studio:8000/v1/sessions/s1/objects/A/snapshot");
    expect(client.transcriptZipPath("s1"))
      .toBe("http://studio:8000/v1/sessions/s1/transcript.zip");
    expect(client.calibrationRenderPath("c1", 7))
      .toBe("http://studio:8000/v1/calibration/c1/render?t=7");
  });
});

describe("StudioClient error handling", () => {
  it("maps a rejected fetch to OfflineError", async () => {
    const client = new StudioClient("", async () => {
      throw new TypeError("connection refused");
    });
    await expect(client.listProblems()).rejects.toBeInstanceOf(OfflineError);
  });

  it("unwraps FastAPI-style {detail: ...} error bodies", async () => {
    const { impl } = fakeFetch([
      json({ detail: { error: "'cw' is not a command on its own; use rotate:cw:V",
                       token: "cw" } }, 422),
    ]);
    const client = new StudioClient("", impl);
    try {
      await client.getSession("s1");
      expect.unreachable();
    } catch (exc) {
      const err = exc as ApiError;
      expect(err).toBeInstanceOf(ApiError);
      expect(err.status).toBe(422);
      expect((err.detail as { token: string }).token).toBe("cw");
      expect(err.message_text).toContain("rotate:cw:V");
    }
  });

  it("joins structured problem lists into one message", async () => {
    const { impl } = fakeFetch([
      json({ detail: { category: "no-json-found",
                       problems: ["no fenced block", "no inline object"] } }, 422),
    ]);
    const client = new StudioClient("", impl);
    try {
      await client.getSession("s1");
      expect.unreachable();
    } catch (exc) {
      expect((exc as ApiError).message_text).toBe("no fenced block; no inline object");
    }
  });

  it("reports an early answer 409 as a notice instead of throwing", async () => {
    const { impl } = fakeFetch([
      json({ error: "keep exploring: 4 more iterations before answering" }, 409),
    ]);
    const client = new StudioClient("", impl);
    const result = await client.submitAnswer("s1", "A");
    expect(result.accepted).toBe(false);
    expect(result.correct).toBeNull();
    expect(result.notice).toContain("keep exploring");
  });

  it("passes through an accepted answer verdict", async () => {
    const { impl, calls } = fakeFetch([
      json({ accepted: true, correct: true, status: "answered_correct", iteration: 5 }),
    ]);
    const client = new StudioClient("", impl);
    const result = await client.submitAnswer("s1", "B");
    expect(calls[0]?.url).toBe("/v1/sessions/s1/answer");
    expect(calls[0]?.body).toEqual({ answer: "B" });
    expect(result).toMatchObject({ accepted: true, correct: true, iteration: 5 });
  });
});

describe("calibration endpoints", () => {
  it("starts a calibration and posts nudges, reading X-Pose", async () => {
    const { impl, calls } = fakeFetch([
      json({ calibration_id: "c1", problem_id: "p1", object: "B",
             pose: [1, 0, 0, 0] }, 201),
      png({ "x-pose": "[0.9238795, 0.0, 0.3826834, 0.0]" }),
    ]);
    const client = new StudioClient("", impl);
    const info = await client.calibrationStart("p1", "B");
    expect(calls[0]?.body).toEqual({ problem_id: "p1", object: "B" });
    expect(info.calibration_id).toBe("c1");

    const nudged = await client.nudge("c1", "right:15");
    expect(calls[1]?.url).toBe("/v1/calibration/c1/nudge");
    expect(calls[1]?.body).toEqual({ command: "right:15" });
    expect(nudged.pose).toEqual([0.9238795, 0.0, 0.3826834, 0.0]);
    expect(nudged.png.size).toBe(PNG_BYTES.length);
  });

  it("treats a missing X-Pose header as a server error", async () => {
    const { impl } = fakeFetch([png()]);
    const client = new StudioClient("", impl);
    await expect(client.nudge("c1", "right:15")).rejects.toBeInstanceOf(ApiError);
  });

  it("commits with an author and returns the new checksum", async () => {
    const { impl, calls } = fakeFetch([
      json({ committed: true, problem_id: "p1", object: "B",
             pose: [0, 1, 0, 0], checksum: "abc123" }),
    ]);
    const client = new StudioClient("", impl);
    const result = await client.commit("c1", "studio-ui");
    expect(calls[0]?.url).toBe("/v1/calibration/c1/commit");
    expect(calls[0]?.body).toEqual({ author: "studio-ui" });
    expect(result.checksum).toBe("abc123");
  });
});
