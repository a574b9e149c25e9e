/**
 * Run a classifier over a dataset file and write a dafte prediction file.
 * The adapter only produces well-formed probabilities; mapping, ensembling
 * and evaluation all live downstream.
 */

import { readFile, writeFile } from "node:fs/promises";

import { Classifier, loadClassifier } from "./classifier.js";
import { parseDataset } from "./dataset.js";
import { PredictionRecord, renderPredictionFile } from "./predictionFile.js";

export interface ExportOptions {
  modelId: string;
  datasetPath: string;
  outPath: string;
  batchSize?: number;
}

export async function exportPredictions(
  options: ExportOptions,
  classifier?: Classifier,
): Promise<{ rows: number; classes: string[] }> {
  const batchSize = options.batchSize ?? 32;
  if (batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${batchSize}`);
  }
  const backend = classifier ?? (await loadClassifier(options.modelId));
  const dataset = parseDataset(await readFile(options.datasetPath, "utf8"));

  const records: PredictionRecord[] = [];
  for (let start = 0; start < dataset.length; start += batchSize) {
    const batch = dataset.slice(start, start + batchSize);
    const probs = await backend.probs(batch.map((row) => row.text));
    if (probs.length !== batch.length) {
      throw new Error(`classifier returned ${probs.length} rows for ${batch.length} inputs`);
    }
    batch.forEach((row, i) => {
      records.push({ id: row.id, probs: probs[i], label: row.label });
    });
  }

  const body = renderPredictionFile(
    { model_id: backend.modelId, classes: backend.classes },
    records,
  );
  await writeFile(options.outPath, body, "utf8");
  return { rows: records.length, classes: backend.classes };
}
