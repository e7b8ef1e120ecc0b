import { readFileSync, readdirSync } from "node:fs";
import { dirname, join } from "node:path";

import { describe, expect, it } from "vitest";

import { parseFigureSpec } from "../src/figspec.js";
import { renderFigure } from "../src/render.js";

const FIGURES = join(__dirname, "..", "figures");

function loadAll() {
  return readdirSync(FIGURES)
    .filter((f) => f.endsWith(".json"))
    .map((f) => {
      const path = join(FIGURES, f);
      return { name: f, path, spec: parseFigureSpec(JSON.parse(readFileSync(path, "utf8"))) };
    });
}

describe("bundled figure specs against the reproduction artifacts", () => {
  it("ships exactly the four comparison figures", () => {
    expect(loadAll().map((f) => f.name).sort()).toEqual([
      "fig1_two_input_seeker.json",
      "fig2_newton_seeker.json",
      "fig3_four_input_vs_newton.json",
      "fig4_vanishing_amplitude.json",
    ]);
  });

  for (const { name, path, spec } of loadAll()) {
    it(`renders ${name} with matching curve counts and axis ranges`, () => {
      const svg = renderFigure(spec, dirname(path));
      const panels = svg.match(/<g class="panel"[^>]*>/g) ?? [];
      expect(panels.length).toBe(spec.panels.length);
      spec.panels.forEach((panel, i) => {
        const attrs = Object.fromEntries(
          [...panels[i].matchAll(/data-([a-z-]+)="([^"]*)"/g)].map((m) => [m[1], m[2]]),
        );
        expect(Number(attrs["curves"])).toBe(panel.curves.length);
        if (panel.y_range) {
          expect(Number(attrs["y-min"])).toBeCloseTo(panel.y_range[0], 6);
          expect(Number(attrs["y-max"])).toBeCloseTo(panel.y_range[1], 6);
        }
        expect(Number(attrs["x-max"])).toBeGreaterThan(Number(attrs["x-min"]));
      });
      expect((svg.match(/class="curve"/g) ?? []).length).toBe(
        spec.panels.reduce((n, p) => n + p.curves.length, 0),
      );
    });
  }
});
