/**
 * Spec dispatch and file output.
 *
 * All inputs are read and validated before anything is written, and the
 * figure is rendered fully in memory, so a failure never leaves a partial
 * image behind. The SVG is always written; the PNG is rasterized from the
 * same bytes.
 */

import { renameSync, writeFileSync } from "node:fs";
import { loadCurve, loadHops, loadLinks, loadNodes, loadVictims } from "./schemas.js";
import type { PlotSpec } from "./spec.js";
import { renderCollisionCurves } from "./plots/curves.js";
import { renderHopTraces } from "./plots/hops.js";
import { renderVictimsTopology } from "./plots/victims.js";

export interface Rendered {
  svg: string;
  warnings: string[];
}

/** Load every input of the spec, render, and return the SVG text. */
export function renderPlot(spec: PlotSpec): Rendered {
  switch (spec.kind) {
    case "victims-topology":
      return renderVictimsTopology({
        victims: loadVictims(spec.victims),
        nodes: loadNodes(spec.nodes),
        links: loadLinks(spec.links),
        title: spec.title,
        slotLabels: spec.slotLabels,
      });
    case "hop-traces":
      return renderHopTraces({
        hops: loadHops(spec.hops),
        title: spec.title,
        events: spec.events,
      });
    case "collision-curves":
      return renderCollisionCurves({
        curves: spec.curves.map((c) => ({
          table: loadCurve(c.path),
          label: c.label,
        })),
        title: spec.title,
      });
  }
}

function writeAtomic(path: string, data: string | Uint8Array): void {
  const tmp = `${path}.tmp`;
  writeFileSync(tmp, data);
  renameSync(tmp, path);
}

/**
 * Write `<base>.svg` and `<base>.png` for the spec's output path (a
 * trailing .svg/.png extension on the spec path is ignored).
 * Returns the written paths.
 */
export async function writeOutputs(
  spec: PlotSpec,
  rendered: Rendered,
): Promise<string[]> {
  const base = spec.output.replace(/\.(svg|png)$/i, "");
  const written: string[] = [];
  const svgPath = `${base}.svg`;
  writeAtomic(svgPath, rendered.svg);
  written.push(svgPath);

  const { Resvg } = await import("@resvg/resvg-js");
  const png = new Resvg(rendered.svg, {
    fitTo: { mode: "zoom", value: 2 },
  }).render();
  const pngPath = `${base}.png`;
  writeAtomic(pngPath, png.asPng());
  written.push(pngPath);
  return written;
}
