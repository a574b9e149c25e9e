#!/usr/bin/env node
/**
 * hf-export export --model <name> --data <file.tsv> --out <preds.jsonl> [--batch-size 32]
 * hf-export serve  --model <name> --port <port>
 *
 * A model name starting with "stub:<classes,...>" runs the deterministic
 * offline backend; anything else is loaded from the model hub.
 */

import { loadClassifier } from "./classifier.js";
import { exportPredictions } from "./exporter.js";
import { serve } from "./server.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new Error(`malformed flag near "${key ?? ""}"`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "export") {
      const flags = parseFlags(rest);
      const result = await exportPredictions({
        modelId: required(flags, "model"),
        datasetPath: required(flags, "data"),
        outPath: required(flags, "out"),
        batchSize: flags.has("batch-size") ? Number(flags.get("batch-size")) : undefined,
      });
      console.log(`wrote ${result.rows} records over classes [${result.classes.join(", ")}]`);
      return 0;
    }
    if (command === "serve") {
      const flags = parseFlags(rest);
      const classifier = await loadClassifier(required(flags, "model"));
      const port = Number(required(flags, "port"));
      await serve(classifier, port);
      console.log(`serving ${classifier.modelId} on port ${port}`);
      return -1; // keep the process alive
    }
    console.error("usage: hf-export <export|serve> --model ... [flags]");
    return 2;
  } catch (error) {
    console.error(`error: ${error instanceof Error ? error.message : error}`);
    return 2;
  }
}

main().then((code) => {
  if (code >= 0) {
    process.exit(code);
  }
});
