import { describe, expect, it } from "vitest";

import {
  parsePredictionFile,
  renderPredictionFile,
  validateRow,
} from "../src/predictionFile.js";

const HEADER = { model_id: "m", classes: ["neg", "pos"] };

describe("prediction file format", () => {
  it("renders a header line plus one line per record", () => {
    const body = renderPredictionFile(HEADER, [
      { id: "0", probs: [0.8, 0.2] },
      { id: "1", probs: [0.4, 0.6], label: 1 },
    ]);
    const lines = body.trimEnd().split("\n");
    expect(lines).toHaveLength(3);
    expect(JSON.parse(lines[0])).toEqual(HEADER);
    expect(JSON.parse(lines[2])).toEqual({ id: "1", probs: [0.4, 0.6], label: 1 });
  });

  it("round-trips through its own parser", () => {
    const records = [
      { id: "a", probs: [0.25, 0.75], label: 1 },
      { id: "b", probs: [0.5, 0.5] },
    ];
    const parsed = parsePredictionFile(renderPredictionFile(HEADER, records));
    expect(parsed.header).toEqual(HEADER);
    expect(parsed.records).toEqual(records);
  });

  it("rejects rows off the simplex", () => {
    expect(() => validateRow([0.9, 0.3], 2)).toThrow(/mass/);
    expect(() => validateRow([0.5, -0.1], 2)).toThrow(/invalid/);
    expect(() => validateRow([1.0], 2)).toThrow(/entries/);
  });

  it("accepts float noise inside the repair band", () => {
    expect(() => validateRow([0.6000003, 0.4], 2)).not.toThrow();
  });

  it("rejects files without records", () => {
    expect(() => parsePredictionFile(JSON.stringify(HEADER) + "\n")).toThrow(/record/);
  });
});
