/**
 * Victim-count-over-time figure with a topology inset.
 *
 * Left: step trace of how many nodes sit in an unresolved slot conflict.
 * Right: the deployed network; one-way links are dashed arrows, two-way
 * links are solid double-ended arrows, and each node carries its id plus
 * (optionally) its final slot and hop.
 */

import type { CsvTable, LinkRow, NodeRow, VictimRow } from "../schemas.js";
import {
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

export interface VictimsTopologyInput {
  victims: CsvTable<VictimRow>;
  nodes: CsvTable<NodeRow>;
  links: CsvTable<LinkRow>;
  title?: string;
  slotLabels: boolean;
}

const WIDTH = 940;
const HEIGHT = 430;

const chartFrame: Frame = {
  width: 560,
  height: HEIGHT,
  margin: { top: 48, right: 16, bottom: 52, left: 56 },
};

function stepPath(points: [number, number][], xEnd: number): string {
  const first = points[0];
  if (first === undefined) return "";
  let d = `M ${fmt(first[0])} ${fmt(first[1])}`;
  for (let i = 1; i < points.length; i++) {
    const [x, y] = points[i]!;
    d += ` H ${fmt(x)} V ${fmt(y)}`;
  }
  d += ` H ${fmt(xEnd)}`;
  return d;
}

function victimChart(
  victims: CsvTable<VictimRow>,
  warnings: string[],
): string {
  const box = innerBox(chartFrame);
  const parts: string[] = [];
  const rows = victims.rows;
  const tMax = rows.length ? Math.max(...rows.map((r) => r.t_s)) : 1;
  const vMax = rows.length ? Math.max(1, ...rows.map((r) => r.victims)) : 1;
  const x = linear([0, tMax], [box.x0, box.x1]);
  const y = linear([0, vMax], [box.y1, box.y0]);

  parts.push(axisBottom(x, box.y1, "time [s]"));
  parts.push(axisLeft(y, box.x0, "victim nodes"));

  if (rows.length === 0) {
    warnings.push(`no data rows in ${victims.file}`);
    parts.push(warningNote(chartFrame, [`no data rows in ${victims.file}`]));
    return el("g", { class: "victim-chart" }, parts);
  }

  const pts: [number, number][] = rows.map((r) => [x(r.t_s), y(r.victims)]);
  parts.push(
    el("path", {
      d: stepPath(pts, box.x1),
      fill: "none",
      stroke: "#1f77b4",
      "stroke-width": 1.5,
    }),
  );
  rows.forEach((r, i) => {
    const raw = victims.raw[i]!;
    parts.push(
      el("circle", {
        cx: fmt(x(r.t_s)),
        cy: fmt(y(r.victims)),
        r: 2,
        fill: "#1f77b4",
        "data-t_s": raw["t_s"] ?? "",
        "data-victims": raw["victims"] ?? "",
      }),
    );
  });
  return el("g", { class: "victim-chart" }, parts);
}

function arrowHead(
  tipX: number,
  tipY: number,
  ux: number,
  uy: number,
): string {
  // Triangle pointing along (ux, uy), tip at (tipX, tipY).
  const size = 6;
  const bx = tipX - ux * size;
  const by = tipY - uy * size;
  const px = -uy * (size * 0.45);
  const py = ux * (size * 0.45);
  return (
    `${fmt(tipX)},${fmt(tipY)} ` +
    `${fmt(bx + px)},${fmt(by + py)} ` +
    `${fmt(bx - px)},${fmt(by - py)}`
  );
}

function topologyInset(
  nodes: CsvTable<NodeRow>,
  links: CsvTable<LinkRow>,
  slotLabels: boolean,
  warnings: string[],
): string {
  const frame: Frame = {
    width: WIDTH,
    height: HEIGHT,
    margin: { top: 48, right: 16, bottom: 52, left: chartFrame.width + 24 },
  };
  const box = innerBox(frame);
  const parts: string[] = [
    el("rect", {
      x: fmt(box.x0),
      y: fmt(box.y0),
      width: fmt(box.x1 - box.x0),
      height: fmt(box.y1 - box.y0),
      fill: "#fafafa",
      stroke: "#bbb",
    }),
  ];

  if (nodes.rows.length === 0) {
    warnings.push(`no data rows in ${nodes.file}`);
    parts.push(warningNote(frame, [`no data rows in ${nodes.file}`]));
    return el("g", { class: "topology" }, parts);
  }

  const pad = 26;
  const xs = nodes.rows.map((n) => n.x_m);
  const ys = nodes.rows.map((n) => n.y_m);
  const x = linear(
    [Math.min(...xs), Math.max(...xs)],
    [box.x0 + pad, box.x1 - pad],
  );
  // y grows upward on the ground plane, downward in SVG.
  const y = linear(
    [Math.min(...ys), Math.max(...ys)],
    [box.y1 - pad, box.y0 + pad],
  );
  const pos = new Map(nodes.rows.map((n) => [n.node, [x(n.x_m), y(n.y_m)]]));

  // Collapse per-direction accessibility rows into unordered pairs.
  const dirs = new Map<string, { ab: boolean; ba: boolean; a: number; b: number }>();
  for (const row of links.rows) {
    if (row.accessible !== 1) continue;
    const a = Math.min(row.node_from, row.node_to);
    const b = Math.max(row.node_from, row.node_to);
    const key = `${a}-${b}`;
    const entry = dirs.get(key) ?? { ab: false, ba: false, a, b };
    if (row.node_from === a) entry.ab = true;
    else entry.ba = true;
    dirs.set(key, entry);
  }

  const nodeRadius = 7;
  const linkParts: string[] = [];
  for (const key of [...dirs.keys()].sort()) {
    const { ab, ba, a, b } = dirs.get(key)!;
    const pa = pos.get(a);
    const pb = pos.get(b);
    if (!pa || !pb) continue;
    const dx = pb[0]! - pa[0]!;
    const dy = pb[1]! - pa[1]!;
    const len = Math.hypot(dx, dy) || 1;
    const ux = dx / len;
    const uy = dy / len;
    const startX = pa[0]! + ux * (nodeRadius + 2);
    const startY = pa[1]! + uy * (nodeRadius + 2);
    const endX = pb[0]! - ux * (nodeRadius + 2);
    const endY = pb[1]! - uy * (nodeRadius + 2);
    const twoWay = ab && ba;
    const lineAttrs: Record<string, string | number> = {
      x1: fmt(startX),
      y1: fmt(startY),
      x2: fmt(endX),
      y2: fmt(endY),
      stroke: "#555",
      "stroke-width": twoWay ? 1.3 : 1,
      "data-from": ab ? a : b,
      "data-to": ab ? b : a,
      "data-mode": twoWay ? "two-way" : "one-way",
    };
    if (!twoWay) lineAttrs["stroke-dasharray"] = "5 3";
    linkParts.push(el("line", lineAttrs));
    // Arrowheads: both ends when two-way, receiver end only when one-way.
    if (twoWay || ab) {
      linkParts.push(
        el("polygon", {
          points: arrowHead(endX, endY, ux, uy),
          fill: "#555",
        }),
      );
    }
    if (twoWay || ba) {
      linkParts.push(
        el("polygon", {
          points: arrowHead(startX, startY, -ux, -uy),
          fill: "#555",
        }),
      );
    }
  }
  parts.push(el("g", { class: "links" }, linkParts));

  const nodeParts: string[] = [];
  for (const n of nodes.rows) {
    const [cx, cy] = pos.get(n.node)! as [number, number];
    const off = n.slot === null;
    const fill = off ? "#cccccc" : n.is_reference ? "#d62728" : "#1f77b4";
    const common = {
      fill,
      stroke: "#222",
      "data-node": String(n.node),
      "data-slot": n.slot === null ? "" : String(n.slot),
      "data-hop": n.hop === null ? "" : String(n.hop),
    };
    if (n.is_reference === 1) {
      nodeParts.push(
        el("rect", {
          x: fmt(cx - nodeRadius),
          y: fmt(cy - nodeRadius),
          width: fmt(2 * nodeRadius),
          height: fmt(2 * nodeRadius),
          ...common,
        }),
      );
    } else {
      nodeParts.push(el("circle", { cx: fmt(cx), cy: fmt(cy), r: nodeRadius, ...common }));
    }
    nodeParts.push(
      text(
        {
          x: fmt(cx),
          y: fmt(cy + 3),
          class: "node-label",
          "text-anchor": "middle",
          fill: "#fff",
        },
        String(n.node),
      ),
    );
    if (slotLabels) {
      const state = off ? "off" : `s${n.slot} h${n.hop}`;
      nodeParts.push(
        text(
          {
            x: fmt(cx),
            y: fmt(cy + nodeRadius + 10),
            class: "node-label",
            "text-anchor": "middle",
          },
          state,
        ),
      );
    }
  }
  parts.push(el("g", { class: "nodes" }, nodeParts));

  // Caption: rendering convention for the two link kinds.
  const lx = box.x0 + 8;
  const ly = box.y1 + 16;
  parts.push(
    el("line", {
      x1: fmt(lx),
      y1: fmt(ly),
      x2: fmt(lx + 26),
      y2: fmt(ly),
      stroke: "#555",
      "stroke-width": 1.3,
    }),
    text({ x: fmt(lx + 31), y: fmt(ly + 3), class: "legend" }, "two-way"),
    el("line", {
      x1: fmt(lx + 92),
      y1: fmt(ly),
      x2: fmt(lx + 118),
      y2: fmt(ly),
      stroke: "#555",
      "stroke-dasharray": "5 3",
    }),
    text({ x: fmt(lx + 123), y: fmt(ly + 3), class: "legend" }, "one-way"),
  );

  return el("g", { class: "topology" }, parts);
}

export function renderVictimsTopology(input: VictimsTopologyInput): {
  svg: string;
  warnings: string[];
} {
  const warnings: string[] = [];
  const children: string[] = [];
  if (input.title !== undefined) {
    children.push(
      text(
        { x: fmt(WIDTH / 2), y: 24, class: "title", "text-anchor": "middle" },
        input.title,
      ),
    );
  }
  children.push(victimChart(input.victims, warnings));
  children.push(
    topologyInset(input.nodes, input.links, input.slotLabels, warnings),
  );
  return { svg: svgDocument(WIDTH, HEIGHT, children), warnings };
}
