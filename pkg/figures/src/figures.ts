/** Figure definitions: which run directories feed which panels. */

import { existsSync } from "node:fs";
import { join } from "node:path";

import { PanelData, PanelSpec, buildPanel } from "./panels.js";
import { readEvents, readSummary, readTable } from "./csv.js";
import { El, el, svgDocument } from "./svg.js";

export interface FigureSpec {
  id: string;
  /** run directories, in column order (fig4 takes odd + even) */
  inputs: number; // how many run directories are expected
  panels: PanelSpec[]; // stacked per column
  title: string;
}

export const FIGURES: Record<string, FigureSpec> = {
  fig2: {
    id: "fig2",
    inputs: 1,
    title: "Single-qubit dephasing and reversal",
    panels: [
      { columns: ["sqrt_n", "quad_x", "quad_p_msz"], yLabel: "field", markers: true },
      { columns: ["sigma_x", "sigma_y"], yLabel: "qubit", endpoints: ["sigma_x", "sigma_y"], yDomain: [-1.05, 1.05] },
    ],
  },
  fig4: {
    id: "fig4",
    inputs: 2,
    title: "Parity measurement: odd and even outcomes",
    panels: [
      { columns: ["rate_plus", "rate_minus"], yLabel: "rate (kappa)", markers: true },
      { columns: ["sxx", "syy", "szz"], yLabel: "stabilizers", endpoints: ["sxx", "syy", "szz"], yDomain: [-1.1, 1.1] },
    ],
  },
  fig5: {
    id: "fig5",
    inputs: 1,
    title: "Imperfect detection (eta = 0.9)",
    panels: [
      { columns: ["rate_plus", "rate_minus"], yLabel: "rate (kappa)", markers: true },
      { columns: ["sxx", "syy", "szz"], yLabel: "stabilizers", endpoints: ["sxx", "syy", "szz"], yDomain: [-1.1, 1.1] },
    ],
  },
  fig6: {
    id: "fig6",
    inputs: 1,
    title: "Qubit relaxation (gamma = 0.1 kappa / pi)",
    panels: [
      { columns: ["rate_plus", "rate_minus"], yLabel: "rate (kappa)", markers: true },
      { columns: ["sxx", "syy", "szz"], yLabel: "stabilizers", endpoints: ["sxx", "syy", "szz"], yDomain: [-1.1, 1.1] },
    ],
  },
};

export function loadRunDirectory(dir: string): PanelData {
  for (const f of ["series.csv", "events.csv", "summary.json"]) {
    if (!existsSync(join(dir, f))) throw new Error(`${dir}: missing ${f}`);
  }
  const series = readTable(join(dir, "series.csv"));
  const masterPath = join(dir, "master.csv");
  const master = existsSync(masterPath) ? readTable(masterPath) : null;
  const events = readEvents(join(dir, "events.csv"));
  const summary = readSummary(join(dir, "summary.json"));
  return {
    series,
    master,
    events,
    feedback: summary.feedback_points ?? [],
    name: dir,
  };
}

const PANEL_W = 340;
const PANEL_H = 200;

export function renderFigure(spec: FigureSpec, runs: PanelData[]): string {
  if (runs.length !== spec.inputs) {
    throw new Error(`${spec.id}: expected ${spec.inputs} run director${spec.inputs === 1 ? "y" : "ies"}, got ${runs.length}`);
  }
  const cols = runs.length;
  const rows = spec.panels.length;
  const width = 20 + cols * PANEL_W;
  const height = 30 + rows * PANEL_H;
  const children: El[] = [
    el("text", { x: width / 2, y: 18, "text-anchor": "middle", "font-size": 12 }, undefined, spec.title),
  ];
  runs.forEach((run, c) => {
    spec.panels.forEach((panel, r) => {
      children.push(
        buildPanel(panel, run, {
          x: 10 + c * PANEL_W,
          y: 26 + r * PANEL_H,
          width: PANEL_W,
          height: PANEL_H,
        })
      );
    });
  });
  return svgDocument(width, height, children);
}

export function renderFromDirectories(figureId: string, dirs: string[]): string {
  const spec = FIGURES[figureId];
  if (!spec) throw new Error(`unknown figure "${figureId}" (have: ${Object.keys(FIGURES).join(", ")})`);
  return renderFigure(spec, dirs.map(loadRunDirectory));
}
