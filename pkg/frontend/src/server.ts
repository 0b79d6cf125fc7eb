import * as fs from "fs";
import * as path from "path";

import express, { Express } from "express";

import { parseRange } from "./range";
import { ReviewSession } from "./session";
import { verdictSchema } from "./types";

export function createApp(session: ReviewSession): Express {
  const app = express();
  app.use(express.json());

  app.get("/api/session", (_req, res) => {
    res.json({ meta: session.meta, instances: session.rows });
  });

  app.get("/api/progress", (_req, res) => {
    res.json(session.progress());
  });

  app.get("/api/verdicts", (_req, res) => {
    res.json(session.allVerdicts());
  });

  app.post("/api/verdicts", (req, res) => {
    const parsed = verdictSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0].message });
      return;
    }
    try {
      session.record(parsed.data);
    } catch (err) {
      res.status(400).json({ error: String(err) });
      return;
    }
    res.json({ ok: true, recorded: parsed.data.instance_id });
  });

  app.get("/api/report", (_req, res) => {
    res.json(session.report());
  });

  app.get("/api/export", (_req, res) => {
    try {
      res.type("application/x-ndjson").send(session.exportVerdicts());
    } catch (err) {
      res.status(409).json({ error: String(err) });
    }
  });

  // audio clips with byte-range support for scrubbing
  app.get("/clips/:name", (req, res) => {
    const name = path.basename(req.params.name);
    const file = path.join(session.dir, "clips", name);
    if (!fs.existsSync(file)) {
      res.status(404).json({ error: "clip not found" });
      return;
    }
    const size = fs.statSync(file).size;
    res.setHeader("Accept-Ranges", "bytes");
    res.setHeader("Content-Type", "audio/wav");
    const range = parseRange(req.headers.range, size);
    if (range === "invalid") {
      res.status(416).setHeader("Content-Range", `bytes */${size}`).end();
      return;
    }
    if (range === null) {
      res.setHeader("Content-Length", size);
      fs.createReadStream(file).pipe(res);
      return;
    }
    res.status(206);
    res.setHeader("Content-Range", `bytes ${range.start}-${range.end}/${size}`);
    res.setHeader("Content-Length", range.end - range.start + 1);
    fs.createReadStream(file, { start: range.start, end: range.end }).pipe(res);
  });

  const publicDir = path.join(__dirname, "..", "public");
  app.use(express.static(publicDir));
  return app;
}
