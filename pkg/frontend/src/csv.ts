import { readFileSync } from "node:fs";

export interface Table {
  columns: string[];
  rows: number[][];
}

/** Parse a plain numeric CSV (header row + comma-separated float rows). */
export function parseCsv(text: string, source = "<string>"): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error(`${source}: empty file`);
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new Error(
        `${source}:${i + 1}: expected ${columns.length} cells, got ${cells.length}`,
      );
    }
    const row = cells.map((c) => Number(c));
    const bad = row.findIndex((v) => Number.isNaN(v));
    if (bad >= 0) {
      throw new Error(`${source}:${i + 1}: cell ${bad + 1} is not a number`);
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new Error(`${source}: no rows`);
  }
  return { columns, rows };
}

export function readCsv(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(`cannot read ${path}: ${(err as Error).message}`);
  }
  return parseCsv(text, path);
}

/** Extract one column by name; unknown names list what exists. */
export function column(table: Table, name: string, source: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(
      `${source}: no column ${JSON.stringify(name)} (has: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((r) => r[idx]);
}
