/** Minimal SVG assembly: scales, polyline paths, markers, axes. */

export interface Scale {
  (x: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const k = d1 === d0 ? 0 : (r1 - r0) / (d1 - d0);
  const f = ((x: number) => r0 + (x - d0) * k) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) throw new Error("extent of empty data");
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const span = hi - lo;
  return [lo - pad * span, hi + pad * span];
}

const fmt = (v: number) => (Math.abs(v) < 1e-12 ? "0" : v.toPrecision(6));

export function pathFor(ts: number[], ys: number[], x: Scale, y: Scale): string {
  const parts: string[] = [];
  for (let i = 0; i < ts.length; i++) {
    parts.push(`${i === 0 ? "M" : "L"}${fmt(x(ts[i]))},${fmt(y(ys[i]))}`);
  }
  return parts.join("");
}

export interface El {
  tag: string;
  attrs: Record<string, string | number>;
  children?: El[];
  text?: string;
}

export function el(tag: string, attrs: Record<string, string | number>, children?: El[], text?: string): El {
  return { tag, attrs, children, text };
}

export function escapeText(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderEl(e: El): string {
  const attrs = Object.entries(e.attrs)
    .map(([k, v]) => ` ${k}="${v}"`)
    .join("");
  const inner = (e.children ?? []).map(renderEl).join("") + escapeText(e.text ?? "");
  return `<${e.tag}${attrs}>${inner}</${e.tag}>`;
}

export function svgDocument(width: number, height: number, children: El[]): string {
  const body = children.map(renderEl).join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n${body}\n</svg>\n`
  );
}

export function axisTicks(lo: number, hi: number, count = 5): number[] {
  const rawStep = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => (hi - lo) / s <= count + 1) ?? mag * 10;
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12; v += step) ticks.push(Math.abs(v) < 1e-12 ? 0 : v);
  return ticks;
}
