/** Two-column text/label dataset files: `text<TAB>label`, one row per line. */

export interface DatasetRow {
  id: string;
  text: string;
  label: number;
}

export function parseDataset(content: string): DatasetRow[] {
  const rows: DatasetRow[] = [];
  const lines = content.split("\n");
  for (let i = 0; i < lines.length; i += 1) {
    const line = lines[i];
    if (line.trim().length === 0) {
      continue;
    }
    const cut = line.lastIndexOf("\t");
    if (cut < 0) {
      throw new Error(`line ${i + 1}: expected "text<TAB>label"`);
    }
    const text = line.slice(0, cut);
    const label = Number(line.slice(cut + 1).trim());
    if (!Number.isInteger(label) || label < 0) {
      throw new Error(`line ${i + 1}: label must be a nonnegative integer`);
    }
    rows.push({ id: String(rows.length), text, label });
  }
  if (rows.length === 0) {
    throw new Error("dataset file has no rows");
  }
  return rows;
}
