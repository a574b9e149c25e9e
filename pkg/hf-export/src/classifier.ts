/**
 * Classifier backends. A model name starting with "stub:" selects the
 * deterministic offline backend (classes listed in the name, probabilities
 * hashed from the input text); anything else is resolved from the model hub
 * through transformers.js and must expose a text-classification head.
 */

import { createHash } from "node:crypto";

export interface Classifier {
  modelId: string;
  classes: string[];
  probs(texts: string[]): Promise<number[][]>;
}

export function softmax(logits: number[]): number[] {
  const peak = Math.max(...logits);
  const exps = logits.map((v) => Math.exp(v - peak));
  const total = exps.reduce((a, b) => a + b, 0);
  return exps.map((v) => v / total);
}

export function stubLogits(text: string, arity: number): number[] {
  const digest = createHash("sha256").update(text, "utf8").digest();
  const logits: number[] = [];
  for (let k = 0; k < arity; k += 1) {
    // bytes to a small signed logit range, stable across runs
    logits.push((digest[k] - 127.5) / 32);
  }
  return logits;
}

class StubClassifier implements Classifier {
  constructor(
    public modelId: string,
    public classes: string[],
  ) {}

  async probs(texts: string[]): Promise<number[][]> {
    return texts.map((text) => softmax(stubLogits(text, this.classes.length)));
  }
}

class TransformersClassifier implements Classifier {
  private constructor(
    public modelId: string,
    public classes: string[],
    private pipe: (texts: string[], options: object) => Promise<unknown>,
  ) {}

  static async load(modelId: string): Promise<TransformersClassifier> {
    // resolved lazily so stub-only setups never pull in the runtime,
    // and environments without it get a actionable failure
    const moduleName = "@huggingface/transformers";
    let pipeline: (task: string, model: string) => Promise<any>;
    try {
      ({ pipeline } = await import(moduleName));
    } catch (error) {
      throw new Error(
        `${moduleName} is not installed; hub-backed models need it (${error})`,
      );
    }
    let pipe;
    try {
      pipe = await pipeline("text-classification", modelId);
    } catch (error) {
      throw new Error(`model not found or not loadable: ${modelId} (${error})`);
    }
    const id2label = (pipe.model.config as { id2label?: Record<string, string> }).id2label;
    if (!id2label) {
      throw new Error(`model ${modelId} declares no labels`);
    }
    const classes = Object.keys(id2label)
      .map(Number)
      .sort((a, b) => a - b)
      .map((k) => id2label[String(k)]);
    return new TransformersClassifier(
      modelId,
      classes,
      pipe as unknown as (texts: string[], options: object) => Promise<unknown>,
    );
  }

  async probs(texts: string[]): Promise<number[][]> {
    // top_k null returns every label's softmaxed score, sorted by score;
    // rows are re-ordered into the model's declared label order.
    const raw = (await this.pipe(texts, { top_k: null })) as Array<
      Array<{ label: string; score: number }>
    >;
    const nested: Array<Array<{ label: string; score: number }>> =
      texts.length === 1 && !Array.isArray(raw[0])
        ? [raw as unknown as Array<{ label: string; score: number }>]
        : raw;
    return nested.map((scores) => {
      const byLabel = new Map(scores.map((s) => [s.label, s.score]));
      return this.classes.map((label) => {
        const score = byLabel.get(label);
        if (score === undefined) {
          throw new Error(`response is missing label ${label}`);
        }
        return score;
      });
    });
  }
}

export async function loadClassifier(modelId: string): Promise<Classifier> {
  if (modelId.startsWith("stub:")) {
    const classes = modelId
      .slice("stub:".length)
      .split(",")
      .map((name) => name.trim())
      .filter((name) => name.length > 0);
    if (classes.length < 2) {
      throw new Error(`stub model needs at least 2 classes, got "${modelId}"`);
    }
    return new StubClassifier(modelId, classes);
  }
  return TransformersClassifier.load(modelId);
}
