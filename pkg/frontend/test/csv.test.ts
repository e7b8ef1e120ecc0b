import { describe, expect, it } from "vitest";

import { column, parseCsv } from "../src/csv.js";

describe("parseCsv", () => {
  it("parses header and numeric rows", () => {
    const t = parseCsv("t,x1\n0,1.5\n0.1,2.5\n");
    expect(t.columns).toEqual(["t", "x1"]);
    expect(t.rows).toEqual([
      [0, 1.5],
      [0.1, 2.5],
    ]);
  });

  it("rejects a header-only file with 'no rows'", () => {
    expect(() => parseCsv("t,x1\n", "empty.csv")).toThrow(/empty\.csv: no rows/);
  });

  it("rejects ragged rows", () => {
    expect(() => parseCsv("t,x1\n0,1,2\n", "bad.csv")).toThrow(/expected 2 cells/);
  });

  it("rejects non-numeric cells", () => {
    expect(() => parseCsv("t,x1\n0,oops\n", "bad.csv")).toThrow(/not a number/);
  });
});

describe("column", () => {
  it("extracts by name", () => {
    const t = parseCsv("t,x1\n0,1\n1,2\n");
    expect(column(t, "x1", "f.csv")).toEqual([1, 2]);
  });

  it("names the missing column and lists what exists", () => {
    const t = parseCsv("t,x1\n0,1\n");
    expect(() => column(t, "x9", "f.csv")).toThrow(/no column "x9" \(has: t, x1\)/);
  });
});
