#!/usr/bin/env node
/**
 * slotmesh-plot: render simulator CSV outputs as SVG + PNG figures.
 *
 *   slotmesh-plot --spec fig.json
 *   slotmesh-plot victims-topology --victims v.csv --nodes n.csv \
 *       --links l.csv --out fig3 [--title T] [--no-slot-labels]
 *   slotmesh-plot hop-traces --hops h.csv --out fig4 \
 *       [--event 20:refs-1-4-off --event 80:ref-5-on]
 *   slotmesh-plot collision-curves --curve curve.csv:20-slots \
 *       [--curve more.csv:19-slots ...] --out fig5
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { loadSpec, plotSpecSchema, type PlotSpec } from "./spec.js";
import { renderPlot, writeOutputs } from "./render.js";
import { SchemaMismatchError } from "./schemas.js";

function parseEvent(s: string): { t_s: number; label: string } {
  const idx = s.indexOf(":");
  if (idx <= 0) throw new Error(`--event expects "<seconds>:<label>", got "${s}"`);
  const t = Number(s.slice(0, idx));
  if (!Number.isFinite(t)) throw new Error(`--event time is not a number: "${s}"`);
  return { t_s: t, label: s.slice(idx + 1) };
}

function parseCurve(s: string): { path: string; label: string } {
  const idx = s.lastIndexOf(":");
  if (idx <= 0) return { path: s, label: s };
  return { path: s.slice(0, idx), label: s.slice(idx + 1) };
}

function specFromArgv(argv: Record<string, unknown>, kind: string): PlotSpec {
  const common = {
    output: String(argv["out"]),
    ...(argv["title"] !== undefined ? { title: String(argv["title"]) } : {}),
  };
  let candidate: unknown;
  if (kind === "victims-topology") {
    candidate = {
      kind,
      victims: String(argv["victims"]),
      nodes: String(argv["nodes"]),
      links: String(argv["links"]),
      slotLabels: argv["slotLabels"] !== false,
      ...common,
    };
  } else if (kind === "hop-traces") {
    const events = ((argv["event"] as string[] | string | undefined) ?? []);
    const list = Array.isArray(events) ? events : [events];
    candidate = {
      kind,
      hops: String(argv["hops"]),
      events: list.map(parseEvent),
      ...common,
    };
  } else {
    const curves = (argv["curve"] as string[] | string | undefined) ?? [];
    const list = Array.isArray(curves) ? curves : [curves];
    candidate = { kind, curves: list.map(parseCurve), ...common };
  }
  const parsed = plotSpecSchema.safeParse(candidate);
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    throw new Error(
      `invalid arguments` +
        (issue ? `: ${issue.path.join(".")}: ${issue.message}` : ""),
    );
  }
  return parsed.data;
}

export async function main(args: string[]): Promise<number> {
  const argv = await yargs(args)
    .usage("render slotmesh CSV outputs as SVG + PNG figures")
    .option("spec", { type: "string", describe: "PlotSpec JSON file" })
    .command("victims-topology", "victim trace with topology inset", (y) =>
      y
        .option("victims", { type: "string", demandOption: true })
        .option("nodes", { type: "string", demandOption: true })
        .option("links", { type: "string", demandOption: true })
        .option("out", { type: "string", demandOption: true })
        .option("title", { type: "string" })
        .option("slot-labels", { type: "boolean", default: true }),
    )
    .command("hop-traces", "per-node hop traces across events", (y) =>
      y
        .option("hops", { type: "string", demandOption: true })
        .option("out", { type: "string", demandOption: true })
        .option("title", { type: "string" })
        .option("event", { type: "string", array: true }),
    )
    .command("collision-curves", "collision-probability curve family", (y) =>
      y
        .option("curve", { type: "string", array: true, demandOption: true })
        .option("out", { type: "string", demandOption: true })
        .option("title", { type: "string" }),
    )
    .strictCommands()
    .help()
    .parse();

  try {
    let spec: PlotSpec;
    if (argv.spec !== undefined) {
      spec = loadSpec(argv.spec);
    } else {
      const kind = String(argv._[0] ?? "");
      if (!kind) {
        console.error("error: give --spec FILE or a figure kind subcommand");
        return 2;
      }
      spec = specFromArgv(argv as Record<string, unknown>, kind);
    }
    const rendered = renderPlot(spec);
    for (const w of rendered.warnings) console.error(`warning: ${w}`);
    const written = await writeOutputs(spec, rendered);
    for (const p of written) console.log(p);
    return 0;
  } catch (err) {
    if (err instanceof SchemaMismatchError) {
      console.error(`schema mismatch: ${err.message}`);
      return 1;
    }
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
