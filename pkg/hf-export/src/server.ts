/**
 * Serve the dafte inference wire contract:
 * POST / with {"inputs": [string, ...]} returns {"probs": [[number; K], ...]}.
 * Requests are handled sequentially; any classifier failure is a 500 with a
 * message body.
 */

import express, { Express } from "express";

import { Classifier } from "./classifier.js";
import { validateRow } from "./predictionFile.js";

export function buildApp(classifier: Classifier): Express {
  const app = express();
  app.use(express.json({ limit: "5mb" }));

  app.post("/", async (req, res) => {
    const inputs = (req.body as { inputs?: unknown })?.inputs;
    if (!Array.isArray(inputs) || inputs.some((t) => typeof t !== "string")) {
      res.status(400).json({ error: 'body must be {"inputs": [string, ...]}' });
      return;
    }
    if (inputs.length === 0) {
      res.json({ probs: [] });
      return;
    }
    try {
      const probs = await classifier.probs(inputs as string[]);
      for (const row of probs) {
        validateRow(row, classifier.classes.length);
      }
      res.json({ probs });
    } catch (error) {
      res.status(500).json({ error: String(error) });
    }
  });

  app.get("/healthz", (_req, res) => {
    res.json({ model_id: classifier.modelId, classes: classifier.classes });
  });

  return app;
}

export async function serve(classifier: Classifier, port: number): Promise<() => void> {
  const app = buildApp(classifier);
  return new Promise((resolve, reject) => {
    const server = app.listen(port, () => {
      resolve(() => server.close());
    });
    server.on("error", (error) => reject(new Error(`cannot listen on ${port}: ${error}`)));
  });
}
