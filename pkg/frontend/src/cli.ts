import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { pathToFileURL } from "node:url";

import { parseFigureSpec } from "./figspec.js";
import { outputPathFor, renderFigure } from "./render.js";

function usage(): never {
  process.stderr.write("usage: render --spec <figure.json> [--spec <figure.json> ...]\n");
  process.exit(1);
}

export function main(argv: string[]): number {
  const specs: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--spec") {
      const value = argv[++i];
      if (!value) usage();
      specs.push(value);
    } else if (argv[i] === "render") {
      // tolerated leading verb: `render --spec ...`
    } else {
      usage();
    }
  }
  if (specs.length === 0) usage();
  for (const specPath of specs) {
    let doc: unknown;
    try {
      doc = JSON.parse(readFileSync(specPath, "utf8"));
    } catch (err) {
      process.stderr.write(`cannot read ${specPath}: ${(err as Error).message}\n`);
      return 1;
    }
    try {
      const spec = parseFigureSpec(doc);
      const svg = renderFigure(spec, dirname(specPath));
      const out = outputPathFor(spec, specPath);
      mkdirSync(dirname(out), { recursive: true });
      writeFileSync(out, svg, "utf8");
      process.stdout.write(`${out}\n`);
    } catch (err) {
      process.stderr.write(`${(err as Error).message}\n`);
      return 1;
    }
  }
  return 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
