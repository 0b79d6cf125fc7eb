import type { AddressInfo } from "net";
import type { Server } from "http";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApp } from "../src/server";
import { ReviewSession } from "../src/session";
import { parseVerdicts, serializeVerdicts } from "../src/verdicts";
import { makeBundle, makeRow, makeVerdict } from "./helpers";

const clipBytes = Buffer.from(
  Array.from({ length: 64 }, (_v, i) => i % 256));

let server: Server;
let base: string;
let session: ReviewSession;

beforeAll(async () => {
  const rows = [
    makeRow(0, { arg1_clip: "clips/a.wav", arg2_clip: "clips/b.wav" }),
    makeRow(1),
    makeRow(2, { arg1_clip: "clips/missing.wav" }),
  ];
  const dir = makeBundle(rows, { "a.wav": clipBytes, "b.wav": clipBytes });
  session = new ReviewSession(dir);
  const app = createApp(session);
  await new Promise<void>((resolve) => {
    server = app.listen(0, resolve);
  });
  base = `http://127.0.0.1:${(server.address() as AddressInfo).port}`;
});

afterAll(() => {
  server.close();
});

describe("session api", () => {
  it("serves the session slice", async () => {
    const data = await (await fetch(`${base}/api/session`)).json();
    expect(data.instances).toHaveLength(3);
    expect(data.meta.sample_size).toBe(3);
  });

  it("records a valid verdict", async () => {
    const resp = await fetch(`${base}/api/verdicts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(makeVerdict(0, "accept")),
    });
    expect(resp.status).toBe(200);
    const progress = await (await fetch(`${base}/api/progress`)).json();
    expect(progress[0].reviewed).toBe(true);
  });

  it("rejects an invalid verdict with 400", async () => {
    const resp = await fetch(`${base}/api/verdicts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ...makeVerdict(1, "accept"),
                             decision: "reject" }),
    });
    expect(resp.status).toBe(400);
    const body = await resp.json();
    expect(body.error).toMatch(/error_class/);
  });

  it("report and export round-trip", async () => {
    await fetch(`${base}/api/verdicts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(makeVerdict(1, "reject",
                                       { error_class: "not_implicit" })),
    });
    const report = await (await fetch(`${base}/api/report`)).json();
    expect(report.reviewed).toBe(2);
    expect(report.not_implicit_rate).toBeCloseTo(0.5);
    const exported = await (await fetch(`${base}/api/export`)).text();
    expect(serializeVerdicts(parseVerdicts(exported))).toBe(exported);
  });
});

describe("audio serving", () => {
  it("serves whole file with Accept-Ranges", async () => {
    const resp = await fetch(`${base}/clips/a.wav`);
    expect(resp.status).toBe(200);
    expect(resp.headers.get("accept-ranges")).toBe("bytes");
    const body = Buffer.from(await resp.arrayBuffer());
    expect(body.equals(clipBytes)).toBe(true);
  });

  it("serves byte ranges for scrubbing", async () => {
    const resp = await fetch(`${base}/clips/a.wav`, {
      headers: { Range: "bytes=8-15" },
    });
    expect(resp.status).toBe(206);
    expect(resp.headers.get("content-range")).toBe("bytes 8-15/64");
    const body = Buffer.from(await resp.arrayBuffer());
    expect(body.equals(clipBytes.subarray(8, 16))).toBe(true);
  });

  it("suffix range returns the tail", async () => {
    const resp = await fetch(`${base}/clips/b.wav`, {
      headers: { Range: "bytes=-4" },
    });
    expect(resp.status).toBe(206);
    const body = Buffer.from(await resp.arrayBuffer());
    expect(body.equals(clipBytes.subarray(60))).toBe(true);
  });

  it("unsatisfiable range gets 416", async () => {
    const resp = await fetch(`${base}/clips/a.wav`, {
      headers: { Range: "bytes=999-" },
    });
    expect(resp.status).toBe(416);
  });

  it("missing clip gets 404; the instance stays reviewable", async () => {
    const resp = await fetch(`${base}/clips/missing.wav`);
    expect(resp.status).toBe(404);
    const post = await fetch(`${base}/api/verdicts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(makeVerdict(2, "accept")),
    });
    expect(post.status).toBe(200);
  });
});
