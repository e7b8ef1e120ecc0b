export type LineStyle = "solid" | "dashed" | "dotted" | "dashdot";

export interface CurveSpec {
  csv: string;
  x: string;
  y: string;
  label: string;
  style?: LineStyle;
  color?: string;
  scale?: number; // multiply the y column (unit changes in effort overlays)
}

export interface PanelSpec {
  x_label?: string;
  y_label?: string;
  curves: CurveSpec[];
  x_range?: [number, number];
  y_range?: [number, number];
}

export interface FigureSpec {
  title?: string;
  width?: number;
  height?: number;
  output: string;
  panels: PanelSpec[];
}

const STYLES: ReadonlySet<string> = new Set(["solid", "dashed", "dotted", "dashdot"]);

function fail(path: string, message: string): never {
  throw new Error(`figure spec ${path}: ${message}`);
}

function asRange(v: unknown, path: string): [number, number] {
  if (!Array.isArray(v) || v.length !== 2 || v.some((x) => typeof x !== "number")) {
    fail(path, "range must be [min, max]");
  }
  const [lo, hi] = v as [number, number];
  if (!(lo < hi)) fail(path, `range must be increasing, got [${lo}, ${hi}]`);
  return [lo, hi];
}

/** Structural validation with precise error paths. */
export function parseFigureSpec(doc: unknown): FigureSpec {
  if (typeof doc !== "object" || doc === null) fail("$", "must be an object");
  const d = doc as Record<string, unknown>;
  if (typeof d.output !== "string" || d.output.length === 0) {
    fail("$.output", "must be a non-empty path");
  }
  if (!Array.isArray(d.panels) || d.panels.length === 0) {
    fail("$.panels", "must be a non-empty array");
  }
  const panels: PanelSpec[] = d.panels.map((p, pi) => {
    if (typeof p !== "object" || p === null) fail(`$.panels[${pi}]`, "must be an object");
    const pd = p as Record<string, unknown>;
    if (!Array.isArray(pd.curves) || pd.curves.length === 0) {
      fail(`$.panels[${pi}].curves`, "must be a non-empty array");
    }
    const curves: CurveSpec[] = pd.curves.map((c, ci) => {
      const where = `$.panels[${pi}].curves[${ci}]`;
      if (typeof c !== "object" || c === null) fail(where, "must be an object");
      const cd = c as Record<string, unknown>;
      for (const key of ["csv", "x", "y", "label"] as const) {
        if (typeof cd[key] !== "string") fail(`${where}.${key}`, "must be a string");
      }
      if (cd.style !== undefined && !STYLES.has(cd.style as string)) {
        fail(`${where}.style`, `unknown style ${JSON.stringify(cd.style)}`);
      }
      if (cd.scale !== undefined && typeof cd.scale !== "number") {
        fail(`${where}.scale`, "must be a number");
      }
      return {
        csv: cd.csv as string,
        x: cd.x as string,
        y: cd.y as string,
        label: cd.label as string,
        style: cd.style as LineStyle | undefined,
        color: cd.color as string | undefined,
        scale: cd.scale as number | undefined,
      };
    });
    return {
      x_label: pd.x_label as string | undefined,
      y_label: pd.y_label as string | undefined,
      curves,
      x_range: pd.x_range !== undefined ? asRange(pd.x_range, `$.panels[${pi}].x_range`) : undefined,
      y_range: pd.y_range !== undefined ? asRange(pd.y_range, `$.panels[${pi}].y_range`) : undefined,
    };
  });
  return {
    title: d.title as string | undefined,
    width: d.width as number | undefined,
    height: d.height as number | undefined,
    output: d.output,
    panels,
  };
}
