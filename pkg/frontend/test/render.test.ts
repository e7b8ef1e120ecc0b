import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { parseFigureSpec } from "../src/figspec.js";
import { niceTicks, renderFigure } from "../src/render.js";

function fixtureDir(): string {
  const dir = mkdtempSync(join(tmpdir(), "liefig-"));
  writeFileSync(join(dir, "a.csv"), "t,x1,x2\n0,0,1\n1,1,0.5\n2,4,0.25\n");
  writeFileSync(join(dir, "b.csv"), "t,x1\n0,2\n1,3\n2,2.5\n");
  writeFileSync(join(dir, "empty.csv"), "t,x1\n");
  return dir;
}

function spec(curves: object[], extra: object = {}) {
  return parseFigureSpec({
    output: "out.svg",
    panels: [{ x_label: "t", y_label: "x", curves, ...extra }],
  });
}

const curveCount = (svg: string) => (svg.match(/class="curve"/g) ?? []).length;

describe("renderFigure", () => {
  it("renders one path per curve with labels", () => {
    const dir = fixtureDir();
    const svg = renderFigure(
      spec([
        { csv: "a.csv", x: "t", y: "x1", label: "first" },
        { csv: "b.csv", x: "t", y: "x1", label: "second", style: "dashed" },
      ]),
      dir,
    );
    expect(curveCount(svg)).toBe(2);
    expect(svg).toContain('data-label="first"');
    expect(svg).toContain('data-label="second"');
    expect(svg).toContain("stroke-dasharray");
  });

  it("exposes auto axis ranges as data attributes", () => {
    const dir = fixtureDir();
    const svg = renderFigure(spec([{ csv: "a.csv", x: "t", y: "x1", label: "c" }]), dir);
    expect(svg).toMatch(/data-x-min="0"/);
    expect(svg).toMatch(/data-x-max="2"/);
    // y range is the data range padded by 4%
    expect(svg).toMatch(/data-y-min="-0.16"/);
    expect(svg).toMatch(/data-y-max="4.16"/);
  });

  it("honours explicit ranges exactly", () => {
    const dir = fixtureDir();
    const svg = renderFigure(
      spec([{ csv: "a.csv", x: "t", y: "x1", label: "c" }], { y_range: [0, 5] }),
      dir,
    );
    expect(svg).toMatch(/data-y-min="0"/);
    expect(svg).toMatch(/data-y-max="5"/);
  });

  it("is byte-stable across repeated renders", () => {
    const dir = fixtureDir();
    const s = spec([
      { csv: "a.csv", x: "t", y: "x1", label: "first" },
      { csv: "a.csv", x: "t", y: "x2", label: "second" },
    ]);
    expect(renderFigure(s, dir)).toBe(renderFigure(s, dir));
    expect(renderFigure(s, dir)).not.toContain(new Date().getFullYear().toString() + "-");
  });

  it("fails on a header-only CSV with 'no rows'", () => {
    const dir = fixtureDir();
    expect(() =>
      renderFigure(spec([{ csv: "empty.csv", x: "t", y: "x1", label: "c" }]), dir),
    ).toThrow(/no rows/);
  });

  it("fails on a missing column with its name", () => {
    const dir = fixtureDir();
    expect(() =>
      renderFigure(spec([{ csv: "a.csv", x: "t", y: "x7", label: "c" }]), dir),
    ).toThrow(/no column "x7"/);
  });

  it("fails on a missing file", () => {
    const dir = fixtureDir();
    expect(() =>
      renderFigure(spec([{ csv: "nope.csv", x: "t", y: "x1", label: "c" }]), dir),
    ).toThrow(/cannot read/);
  });

  it("applies the per-curve scale factor", () => {
    const dir = fixtureDir();
    const svg = renderFigure(
      spec([{ csv: "a.csv", x: "t", y: "x1", label: "c", scale: 10 }]),
      dir,
    );
    expect(svg).toMatch(/data-y-max="41.6"/); // 4 * 10 padded by 4%
  });
});

describe("parseFigureSpec", () => {
  it("rejects missing fields with a path", () => {
    expect(() => parseFigureSpec({ panels: [] })).toThrow(/\$\.output/);
    expect(() =>
      parseFigureSpec({ output: "o.svg", panels: [{ curves: [{ csv: "a", x: "t" }] }] }),
    ).toThrow(/curves\[0\]\.y/);
    expect(() =>
      parseFigureSpec({
        output: "o.svg",
        panels: [{ curves: [{ csv: "a", x: "t", y: "x1", label: "l", style: "wavy" }] }],
      }),
    ).toThrow(/unknown style/);
    expect(() =>
      parseFigureSpec({
        output: "o.svg",
        panels: [{ curves: [{ csv: "a", x: "t", y: "x1", label: "l" }], y_range: [2, 1] }],
      }),
    ).toThrow(/increasing/);
  });
});

describe("niceTicks", () => {
  it("covers the range with a handful of round steps", () => {
    const ticks = niceTicks(0, 50);
    expect(ticks[0]).toBe(0);
    expect(ticks[ticks.length - 1]).toBe(50);
    expect(ticks.length).toBeGreaterThanOrEqual(4);
    expect(ticks.length).toBeLessThanOrEqual(8);
  });
});
