/**
 * Hop-count traces across scenario events.
 *
 * One step trace per node; every recorded hop change is a point carrying
 * its verbatim CSV values. Optional vertical markers annotate scenario
 * events (references switching off and on).
 */

import type { EventMark } from "../spec.js";
import type { CsvTable, HopRow } from "../schemas.js";
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

export interface HopTracesInput {
  hops: CsvTable<HopRow>;
  title?: string;
  events: EventMark[];
}

const FRAME: Frame = {
  width: 760,
  height: 420,
  margin: { top: 48, right: 24, bottom: 52, left: 56 },
};

export function renderHopTraces(input: HopTracesInput): {
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

  const rows = input.hops.rows;
  const tMax = rows.length
    ? Math.max(...rows.map((r) => r.t_s), ...input.events.map((e) => e.t_s))
    : Math.max(1, ...input.events.map((e) => e.t_s));
  const hopMax = rows.length ? Math.max(1, ...rows.map((r) => r.hop)) : 1;
  const x = linear([0, tMax], [box.x0, box.x1]);
  const y = linear([0, hopMax], [box.y1, box.y0]);

  children.push(axisBottom(x, box.y1, "time [s]"));
  children.push(axisLeft(y, box.x0, "hop count"));

  for (const ev of input.events) {
    children.push(
      el("line", {
        x1: fmt(x(ev.t_s)),
        y1: fmt(box.y0),
        x2: fmt(x(ev.t_s)),
        y2: fmt(box.y1),
        class: "event-line",
      }),
      text(
        {
          x: fmt(x(ev.t_s) + 3),
          y: fmt(box.y0 + 10),
          class: "event-label",
        },
        ev.label,
      ),
    );
  }

  if (rows.length === 0) {
    warnings.push(`no data rows in ${input.hops.file}`);
    children.push(warningNote(FRAME, [`no data rows in ${input.hops.file}`]));
    return { svg: svgDocument(FRAME.width, FRAME.height, children), warnings };
  }

  // Group the change events per node, preserving file order (time-sorted).
  const byNode = new Map<number, { row: HopRow; raw: Record<string, string> }[]>();
  rows.forEach((row, i) => {
    const entry = byNode.get(row.node) ?? [];
    entry.push({ row, raw: input.hops.raw[i]! });
    byNode.set(row.node, entry);
  });

  const traceParts: string[] = [];
  const nodesSorted = [...byNode.keys()].sort((a, b) => a - b);
  for (const node of nodesSorted) {
    const color = PALETTE[(node - 1) % PALETTE.length]!;
    const entries = byNode
      .get(node)!
      .slice()
      .sort((p, q) => p.row.t_s - q.row.t_s);
    const first = entries[0]!;
    let d = `M ${fmt(x(first.row.t_s))} ${fmt(y(first.row.hop))}`;
    for (let i = 1; i < entries.length; i++) {
      const e = entries[i]!;
      d += ` H ${fmt(x(e.row.t_s))} V ${fmt(y(e.row.hop))}`;
    }
    d += ` H ${fmt(box.x1)}`;
    traceParts.push(
      el("path", {
        d,
        fill: "none",
        stroke: color,
        "stroke-width": 1.2,
        "data-node": String(node),
      }),
    );
    for (const e of entries) {
      traceParts.push(
        el("circle", {
          cx: fmt(x(e.row.t_s)),
          cy: fmt(y(e.row.hop)),
          r: 1.8,
          fill: color,
          "data-t_s": e.raw["t_s"] ?? "",
          "data-node": e.raw["node"] ?? "",
          "data-hop": e.raw["hop"] ?? "",
        }),
      );
    }
  }
  children.push(el("g", { class: "hop-traces" }, traceParts));
  children.push(
    text(
      { x: fmt(box.x1), y: fmt(box.y0 - 8), class: "legend", "text-anchor": "end" },
      `${nodesSorted.length} nodes, one trace each`,
    ),
  );

  return { svg: svgDocument(FRAME.width, FRAME.height, children), warnings };
}
