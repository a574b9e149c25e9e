/**
 * The dafte prediction-file format: a JSON header line followed by one JSON
 * record per sample. Probabilities must land on the simplex; the consumer
 * renormalizes float noise within 1e-6 and rejects anything worse, so the
 * writer validates with the same band before emitting.
 */

export interface PredictionHeader {
  model_id: string;
  classes: string[];
}

export interface PredictionRecord {
  id: string;
  probs: number[];
  label?: number;
}

export const ROW_MASS_TOLERANCE = 1e-6;

export function validateRow(probs: number[], arity: number): void {
  if (probs.length !== arity) {
    throw new Error(`row has ${probs.length} entries, expected ${arity}`);
  }
  let mass = 0;
  for (const p of probs) {
    if (!Number.isFinite(p) || p < 0) {
      throw new Error(`invalid probability entry ${p}`);
    }
    mass += p;
  }
  if (Math.abs(mass - 1) > ROW_MASS_TOLERANCE) {
    throw new Error(`row mass ${mass} outside 1 +- ${ROW_MASS_TOLERANCE}`);
  }
}

export function renderPredictionFile(
  header: PredictionHeader,
  records: PredictionRecord[],
): string {
  const lines = [JSON.stringify({ model_id: header.model_id, classes: header.classes })];
  for (const record of records) {
    validateRow(record.probs, header.classes.length);
    const body: Record<string, unknown> = { id: record.id, probs: record.probs };
    if (record.label !== undefined) {
      body.label = record.label;
    }
    lines.push(JSON.stringify(body));
  }
  return lines.join("\n") + "\n";
}

/** Parse and re-validate an emitted file (the consumer-side contract). */
export function parsePredictionFile(text: string): {
  header: PredictionHeader;
  records: PredictionRecord[];
} {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length < 2) {
    throw new Error("prediction file needs a header and at least one record");
  }
  const header = JSON.parse(lines[0]) as PredictionHeader;
  if (typeof header.model_id !== "string" || !Array.isArray(header.classes)) {
    throw new Error("header must carry model_id and classes");
  }
  const records: PredictionRecord[] = [];
  for (const line of lines.slice(1)) {
    const record = JSON.parse(line) as PredictionRecord;
    if (typeof record.id !== "string" || !Array.isArray(record.probs)) {
      throw new Error("record must carry id and probs");
    }
    validateRow(record.probs, header.classes.length);
    records.push(record);
  }
  return { header, records };
}
