/**
 * PlotSpec: what to draw, from which CSV files, to which image path.
 *
 * Three figure kinds:
 *  - "victims-topology": victim count over time with a topology inset,
 *  - "hop-traces": per-node hop counts over time with event annotations,
 *  - "collision-curves": one collision-probability curve per labeled CSV.
 */

import { readFileSync } from "node:fs";
import { z } from "zod";

const eventMark = z.object({ t_s: z.number(), label: z.string() });

export const plotSpecSchema = z.discriminatedUnion("kind", [
  z.object({
    kind: z.literal("victims-topology"),
    victims: z.string(),
    nodes: z.string(),
    links: z.string(),
    output: z.string(),
    title: z.string().optional(),
    /** Label every node with its slot and hop in the topology inset. */
    slotLabels: z.boolean().default(true),
  }),
  z.object({
    kind: z.literal("hop-traces"),
    hops: z.string(),
    output: z.string(),
    title: z.string().optional(),
    /** Vertical markers for scenario events (reference off/on, ...). */
    events: z.array(eventMark).default([]),
  }),
  z.object({
    kind: z.literal("collision-curves"),
    curves: z.array(z.object({ path: z.string(), label: z.string() })).min(1),
    output: z.string(),
    title: z.string().optional(),
  }),
]);

export type PlotSpec = z.infer<typeof plotSpecSchema>;
export type EventMark = z.infer<typeof eventMark>;

/** Load and validate a PlotSpec from a JSON file. */
export function loadSpec(path: string): PlotSpec {
  const parsed = plotSpecSchema.safeParse(
    JSON.parse(readFileSync(path, "utf8")),
  );
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    throw new Error(
      `${path}: invalid plot spec` +
        (issue ? `: ${issue.path.join(".")}: ${issue.message}` : ""),
    );
  }
  return parsed.data;
}
