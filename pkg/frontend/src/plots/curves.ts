/**
 * Collision-probability curve families: one labeled curve per input CSV
 * (typically one per slot-count group of a sweep).
 */

import type { CsvTable, CurveRow } from "../schemas.js";
import {
  PALETTE,
  axisBottom,
  axisLeft,
  document as svgDocument,
  el,
  fmt,
  innerBox,
  linear,
  text,
  warningNote,
  type Frame,
} from "../svg.js";

export interface CurveFamilyInput {
  curves: { table: CsvTable<CurveRow>; label: string }[];
  title?: string;
}

const FRAME: Frame = {
  width: 720,
  height: 420,
  margin: { top: 48, right: 24, bottom: 52, left: 56 },
};

export function renderCollisionCurves(input: CurveFamilyInput): {
  svg: string;
  warnings: string[];
} {
  const warnings: string[] = [];
  const box = innerBox(FRAME);
  const children: string[] = [];
  if (input.title !== undefined) {
    children.push(
      text(
        {
          x: fmt(FRAME.width / 2),
          y: 24,
          class: "title",
          "text-anchor": "middle",
        },
        input.title,
      ),
    );
  }

  const allRows = input.curves.flatMap((c) => c.table.rows);
  const tMax = allRows.length ? Math.max(...allRows.map((r) => r.t_s)) : 1;
  const x = linear([0, tMax], [box.x0, box.x1]);
  const y = linear([0, 1], [box.y1, box.y0]);

  children.push(axisBottom(x, box.y1, "time [s]"));
  children.push(axisLeft(y, box.x0, "collision probability", 5));

  const empty = input.curves.filter((c) => c.table.rows.length === 0);
  for (const c of empty) {
    warnings.push(`no data rows in ${c.table.file}`);
  }
  if (empty.length === input.curves.length) {
    children.push(
      warningNote(
        FRAME,
        empty.map((c) => `no data rows in ${c.table.file}`),
      ),
    );
    return { svg: svgDocument(FRAME.width, FRAME.height, children), warnings };
  }

  const curveParts: string[] = [];
  input.curves.forEach((c, ci) => {
    if (c.table.rows.length === 0) return;
    const color = PALETTE[ci % PALETTE.length]!;
    const pts = c.table.rows
      .map((r, i) => ({ r, raw: c.table.raw[i]! }))
      .sort((p, q) => p.r.t_s - q.r.t_s);
    const d = pts
      .map(
        (p, i) =>
          `${i === 0 ? "M" : "L"} ${fmt(x(p.r.t_s))} ${fmt(y(p.r.probability))}`,
      )
      .join(" ");
    curveParts.push(
      el("path", {
        d,
        fill: "none",
        stroke: color,
        "stroke-width": 1.5,
        "data-curve": c.label,
      }),
    );
    for (const p of pts) {
      curveParts.push(
        el("circle", {
          cx: fmt(x(p.r.t_s)),
          cy: fmt(y(p.r.probability)),
          r: 1.6,
          fill: color,
          "data-curve": c.label,
          "data-t_s": p.raw["t_s"] ?? "",
          "data-probability": p.raw["probability"] ?? "",
          "data-n_realizations": p.raw["n_realizations"] ?? "",
        }),
      );
    }
  });
  children.push(el("g", { class: "curves" }, curveParts));

  // Legend, top right inside the plot area.
  const legendParts: string[] = [];
  input.curves.forEach((c, ci) => {
    const color = PALETTE[ci % PALETTE.length]!;
    const ly = box.y0 + 14 + ci * 16;
    const lx = box.x1 - 150;
    legendParts.push(
      el("line", {
        x1: fmt(lx),
        y1: fmt(ly - 4),
        x2: fmt(lx + 22),
        y2: fmt(ly - 4),
        stroke: color,
        "stroke-width": 1.5,
      }),
      text({ x: fmt(lx + 27), y: fmt(ly), class: "legend" }, c.label),
    );
  });
  children.push(el("g", { class: "curve-legend" }, legendParts));

  return { svg: svgDocument(FRAME.width, FRAME.height, children), warnings };
}
