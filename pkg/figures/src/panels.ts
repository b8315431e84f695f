/** Panel assembly: solid trajectory curves, dashed averages, detection-time
 * markers, and post-feedback endpoint dots (offset horizontally when they
 * overlap, as in the source figures). */

import { DetectionEvent, FeedbackPoint, Table, requireColumn } from "./csv.js";
import { El, Scale, axisTicks, el, extent, linearScale, pathFor } from "./svg.js";

export const COLORS: Record<string, string> = {
  sqrt_n: "#444444",
  quad_x: "#1f77b4",
  quad_p_msz: "#2ca02c",
  sigma_x: "#1f77b4",
  sigma_y: "#d62728",
  rate_plus: "#1f77b4",
  rate_minus: "#d62728",
  sxx: "#1f77b4",
  syy: "#2ca02c",
  szz: "#d62728",
};

export const LABELS: Record<string, string> = {
  sqrt_n: "sqrt(n)",
  quad_x: "Re<a>",
  quad_p_msz: "-<sz Im a>",
  sigma_x: "<sx>",
  sigma_y: "<sy>",
  rate_plus: "rate +",
  rate_minus: "rate -",
  sxx: "<sx sx>",
  syy: "<sy sy>",
  szz: "<sz sz>",
};

export interface PanelSpec {
  columns: string[];
  yLabel: string;
  markers?: boolean; // detection-event ticks
  endpoints?: string[]; // columns with post-feedback dots
  yDomain?: [number, number];
}

export interface PanelData {
  series: Table; // solid
  master: Table | null; // dashed overlay
  events: DetectionEvent[];
  feedback: FeedbackPoint[];
  name: string;
}

export interface Box {
  x: number;
  y: number;
  width: number;
  height: number;
}

const MARKER_CHANNEL_COLOR: Record<string, string> = {
  plus: "#1f77b4",
  minus: "#d62728",
  single: "#444444",
};

export function buildPanel(spec: PanelSpec, data: PanelData, box: Box): El {
  const t = requireColumn(data.series, "t", data.name);
  const inner: Box = {
    x: box.x + 46,
    y: box.y + 14,
    width: box.width - 58,
    height: box.height - 40,
  };
  const xScale = linearScale([t[0], t[t.length - 1]], [inner.x, inner.x + inner.width]);

  const allValues: number[] = [];
  for (const c of spec.columns) {
    allValues.push(...requireColumn(data.series, c, data.name));
    if (data.master) allValues.push(...requireColumn(data.master, c, `${data.name} (master)`));
  }
  for (const fp of data.feedback) {
    if (spec.endpoints?.includes(fp.column)) allValues.push(fp.value);
  }
  const yDomain = spec.yDomain ?? extent(allValues);
  const yScale = linearScale(yDomain, [inner.y + inner.height, inner.y]);

  const children: El[] = [frame(inner, xScale, yScale, spec.yLabel)];

  if (data.master) {
    for (const c of spec.columns) {
      const tm = requireColumn(data.master, "t", `${data.name} (master)`);
      children.push(
        el("path", {
          d: pathFor(tm, requireColumn(data.master, c, data.name), xScale, yScale),
          fill: "none",
          stroke: COLORS[c] ?? "#888",
          "stroke-width": 1,
          "stroke-dasharray": "5,4",
          class: `average average-${c}`,
        })
      );
    }
  }
  for (const c of spec.columns) {
    children.push(
      el("path", {
        d: pathFor(t, requireColumn(data.series, c, data.name), xScale, yScale),
        fill: "none",
        stroke: COLORS[c] ?? "#333",
        "stroke-width": 1.5,
        class: `trajectory trajectory-${c}`,
      })
    );
  }

  if (spec.markers) {
    for (const ev of data.events) {
      const xPix = xScale(ev.t);
      const y0 = inner.y + inner.height;
      children.push(
        el("path", {
          d: `M${xPix},${y0}L${xPix - 4},${y0 + 9}L${xPix + 4},${y0 + 9}Z`,
          fill: MARKER_CHANNEL_COLOR[ev.channel],
          class: `event-marker event-${ev.channel}`,
        })
      );
    }
  }

  if (spec.endpoints) {
    const dots = data.feedback.filter((fp) => spec.endpoints!.includes(fp.column));
    const placed: { x: number; y: number }[] = [];
    for (const fp of dots) {
      let xPix = xScale(fp.time);
      const yPix = yScale(fp.value);
      // offset horizontally until clear of previously placed dots
      while (placed.some((p) => Math.abs(p.x - xPix) < 9 && Math.abs(p.y - yPix) < 9)) {
        xPix += 10;
      }
      placed.push({ x: xPix, y: yPix });
      children.push(
        el("circle", {
          cx: xPix,
          cy: yPix,
          r: 4,
          fill: COLORS[fp.column] ?? "#000",
          stroke: "black",
          "stroke-width": 0.7,
          class: `endpoint endpoint-${fp.column}`,
        })
      );
    }
  }

  // legend
  spec.columns.forEach((c, i) => {
    children.push(
      el(
        "text",
        {
          x: inner.x + inner.width - 4,
          y: inner.y + 12 + 12 * i,
          "text-anchor": "end",
          "font-size": 9,
          fill: COLORS[c] ?? "#333",
        },
        undefined,
        LABELS[c] ?? c
      )
    );
  });

  return el("g", { class: "panel", "data-name": data.name }, children);
}

function frame(inner: Box, x: Scale, y: Scale, yLabel: string): El {
  const children: El[] = [
    el("rect", {
      x: inner.x,
      y: inner.y,
      width: inner.width,
      height: inner.height,
      fill: "none",
      stroke: "#222",
      "stroke-width": 0.8,
    }),
  ];
  for (const tick of axisTicks(x.domain[0], x.domain[1])) {
    const xp = x(tick);
    children.push(el("line", { x1: xp, y1: inner.y + inner.height, x2: xp, y2: inner.y + inner.height + 4, stroke: "#222", "stroke-width": 0.8 }));
    children.push(
      el("text", { x: xp, y: inner.y + inner.height + 15, "text-anchor": "middle", "font-size": 9 }, undefined, trim(tick))
    );
  }
  for (const tick of axisTicks(y.domain[0], y.domain[1], 4)) {
    const yp = y(tick);
    children.push(el("line", { x1: inner.x - 4, y1: yp, x2: inner.x, y2: yp, stroke: "#222", "stroke-width": 0.8 }));
    children.push(el("text", { x: inner.x - 7, y: yp + 3, "text-anchor": "end", "font-size": 9 }, undefined, trim(tick)));
  }
  children.push(
    el(
      "text",
      {
        x: inner.x - 34,
        y: inner.y + inner.height / 2,
        "font-size": 10,
        transform: `rotate(-90 ${inner.x - 34} ${inner.y + inner.height / 2})`,
        "text-anchor": "middle",
      },
      undefined,
      yLabel
    )
  );
  children.push(
    el(
      "text",
      { x: inner.x + inner.width / 2, y: inner.y + inner.height + 28, "text-anchor": "middle", "font-size": 10 },
      undefined,
      "t (1/kappa)"
    )
  );
  return el("g", { class: "frame" }, children);
}

function trim(v: number): string {
  const s = v.toPrecision(3);
  return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
}
