/**
 * Minimal deterministic SVG assembly. Identical inputs produce identical
 * bytes: attribute order is insertion order, coordinates are formatted with
 * a fixed rule, nothing depends on time or randomness.
 */

import { scaleLinear, type ScaleLinear } from "d3-scale";

export type Attrs = Record<string, string | number>;

export function esc(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Fixed-precision coordinate formatting (deterministic, compact). */
export function fmt(x: number): string {
  const s = x.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function el(
  tag: string,
  attrs: Attrs = {},
  children: string | string[] = [],
): string {
  const body = Array.isArray(children) ? children.join("") : children;
  const attrText = Object.entries(attrs)
    .map(([k, v]) => ` ${k}="${esc(String(v))}"`)
    .join("");
  return body === ""
    ? `<${tag}${attrText}/>`
    : `<${tag}${attrText}>${body}</${tag}>`;
}

export function text(attrs: Attrs, content: string): string {
  return el("text", attrs, esc(content));
}

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export function innerBox(frame: Frame) {
  return {
    x0: frame.margin.left,
    y0: frame.margin.top,
    x1: frame.width - frame.margin.right,
    y1: frame.height - frame.margin.bottom,
  };
}

export function linear(
  domain: [number, number],
  range: [number, number],
): ScaleLinear<number, number> {
  const [a, b] = domain;
  // A degenerate domain (single value) still needs a usable scale.
  return scaleLinear()
    .domain(a === b ? [a - 1, b + 1] : [a, b])
    .range(range);
}

export function axisBottom(
  scale: ScaleLinear<number, number>,
  y: number,
  label: string,
  tickCount = 6,
): string {
  const [x0, x1] = scale.range() as [number, number];
  const parts: string[] = [
    el("line", {
      x1: fmt(x0),
      y1: fmt(y),
      x2: fmt(x1),
      y2: fmt(y),
      class: "axis",
    }),
  ];
  for (const t of scale.ticks(tickCount)) {
    const x = scale(t);
    parts.push(
      el("line", {
        x1: fmt(x),
        y1: fmt(y),
        x2: fmt(x),
        y2: fmt(y + 5),
        class: "axis",
      }),
      text(
        { x: fmt(x), y: fmt(y + 17), class: "tick", "text-anchor": "middle" },
        String(t),
      ),
    );
  }
  parts.push(
    text(
      {
        x: fmt((x0 + x1) / 2),
        y: fmt(y + 32),
        class: "axis-label",
        "text-anchor": "middle",
      },
      label,
    ),
  );
  return el("g", { class: "x-axis" }, parts);
}

export function axisLeft(
  scale: ScaleLinear<number, number>,
  x: number,
  label: string,
  tickCount = 6,
): string {
  const [y1, y0] = scale.range() as [number, number]; // range is [bottom, top]
  const parts: string[] = [
    el("line", {
      x1: fmt(x),
      y1: fmt(y0),
      x2: fmt(x),
      y2: fmt(y1),
      class: "axis",
    }),
  ];
  for (const t of scale.ticks(tickCount)) {
    const y = scale(t);
    parts.push(
      el("line", {
        x1: fmt(x - 5),
        y1: fmt(y),
        x2: fmt(x),
        y2: fmt(y),
        class: "axis",
      }),
      text(
        {
          x: fmt(x - 8),
          y: fmt(y + 4),
          class: "tick",
          "text-anchor": "end",
        },
        String(t),
      ),
    );
  }
  parts.push(
    el(
      "g",
      { transform: `translate(${fmt(x - 34)} ${fmt((y0 + y1) / 2)}) rotate(-90)` },
      text({ x: 0, y: 0, class: "axis-label", "text-anchor": "middle" }, label),
    ),
  );
  return el("g", { class: "y-axis" }, parts);
}

/** Distinguishable trace colors, assigned deterministically by index. */
export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#e377c2",
  "#17becf",
  "#bcbd22",
  "#7f7f7f",
];

export const STYLE = `
  text { font-family: Helvetica, Arial, sans-serif; fill: #222; }
  .title { font-size: 14px; font-weight: bold; }
  .tick { font-size: 10px; }
  .axis-label { font-size: 11px; }
  .axis { stroke: #222; stroke-width: 1; }
  .grid { stroke: #ddd; stroke-width: 0.5; }
  .warning { font-size: 12px; fill: #b31b1b; font-style: italic; }
  .legend { font-size: 11px; }
  .node-label { font-size: 9px; }
  .event-line { stroke: #888; stroke-dasharray: 4 3; }
  .event-label { font-size: 10px; fill: #555; }
`;

export function document(
  width: number,
  height: number,
  children: string[],
): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}">` +
    el("style", {}, STYLE) +
    el("rect", {
      x: 0,
      y: 0,
      width,
      height,
      fill: "#ffffff",
    }) +
    children.join("") +
    `</svg>`
  );
}

/** Centered warning annotation used when an input table has no data rows. */
export function warningNote(frame: Frame, lines: string[]): string {
  const box = innerBox(frame);
  const cx = (box.x0 + box.x1) / 2;
  const cy = (box.y0 + box.y1) / 2;
  return el(
    "g",
    { class: "warnings" },
    lines.map((line, i) =>
      text(
        {
          x: fmt(cx),
          y: fmt(cy + i * 16),
          class: "warning",
          "text-anchor": "middle",
        },
        line,
      ),
    ),
  );
}
