/** CLI: rnpm-figures --figure fig4 --dir out/fig4-odd --dir out/fig4-even --out fig4.svg */

import { writeFileSync } from "node:fs";

import { renderFromDirectories } from "./figures.js";

function parseArgs(argv: string[]) {
  let figure = "";
  let out = "";
  const dirs: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--figure":
        figure = argv[++i];
        break;
      case "--dir":
        dirs.push(argv[++i]);
        break;
      case "--out":
        out = argv[++i];
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!figure || !out || dirs.length === 0) {
    throw new Error("usage: --figure <fig2|fig4|fig5|fig6> --dir <run dir> [--dir <run dir>] --out <file.svg>");
  }
  return { figure, dirs, out };
}

try {
  const { figure, dirs, out } = parseArgs(process.argv.slice(2));
  writeFileSync(out, renderFromDirectories(figure, dirs));
  console.log(`wrote ${out}`);
} catch (err) {
  console.error(`error: ${(err as Error).message}`);
  process.exit(1);
}
