/**
 * CSV loading and validation for the simulator's documented output files.
 *
 * Every loader keeps the raw string cells exactly as they appear in the
 * file; plots attach those verbatim strings to the rendered elements so a
 * rendered point can always be traced back to its source row.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";
import { z } from "zod";

/** A required column is absent, or a cell cannot be read as documented. */
export class SchemaMismatchError extends Error {
  constructor(
    readonly file: string,
    readonly columns: string[],
    detail: string,
  ) {
    super(`${file}: ${detail}`);
    this.name = "SchemaMismatchError";
  }
}

/** Parsed table: typed rows plus the verbatim string cells per row. */
export interface CsvTable<T> {
  file: string;
  header: string[];
  rows: T[];
  raw: Record<string, string>[];
}

const numeric = z
  .string()
  .regex(/^-?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/, "not a number")
  .transform(Number);

const integer = z.string().regex(/^-?\d+$/, "not an integer").transform(Number);

/** Empty cell allowed (node currently off); otherwise an integer. */
const integerOrEmpty = z
  .string()
  .regex(/^(-?\d+)?$/, "not an integer or empty")
  .transform((s) => (s === "" ? null : Number(s)));

export const victimRow = z.object({ t_s: numeric, victims: integer });
export const hopRow = z.object({ t_s: numeric, node: integer, hop: integer });
export const nodeRow = z.object({
  node: integer,
  x_m: numeric,
  y_m: numeric,
  is_reference: integer,
  slot: integerOrEmpty,
  hop: integerOrEmpty,
});
export const linkRow = z.object({
  node_from: integer,
  node_to: integer,
  accessible: integer,
});
export const curveRow = z.object({
  t_s: numeric,
  probability: numeric,
  n_realizations: integer,
});

export type VictimRow = z.infer<typeof victimRow>;
export type HopRow = z.infer<typeof hopRow>;
export type NodeRow = z.infer<typeof nodeRow>;
export type LinkRow = z.infer<typeof linkRow>;
export type CurveRow = z.infer<typeof curveRow>;

function requiredColumns(schema: z.ZodObject<z.ZodRawShape>): string[] {
  return Object.keys(schema.shape);
}

/**
 * Read and validate one CSV file.
 *
 * Throws SchemaMismatchError naming the offending column(s) when the header
 * lacks a required column or a cell fails its column rule. Extra columns
 * are allowed and preserved in the raw rows.
 */
export function loadCsv<S extends z.ZodObject<z.ZodRawShape>>(
  file: string,
  schema: S,
): CsvTable<z.infer<S>> {
  const text = readFileSync(file, "utf8");
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  const header = parsed.meta.fields ?? [];
  const required = requiredColumns(schema);
  const missing = required.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaMismatchError(
      file,
      missing,
      `missing required column(s): ${missing.join(", ")} ` +
        `(header has: ${header.join(", ") || "nothing"})`,
    );
  }
  const rows: z.infer<S>[] = [];
  parsed.data.forEach((raw, i) => {
    const out = schema.safeParse(raw);
    if (!out.success) {
      const issue = out.error.issues[0];
      const column = issue ? String(issue.path[0]) : "?";
      throw new SchemaMismatchError(
        file,
        [column],
        `column "${column}" has an invalid value in data row ${i + 1}` +
          (issue ? ` (${issue.message})` : ""),
      );
    }
    rows.push(out.data);
  });
  return { file, header, rows, raw: parsed.data };
}

export const loadVictims = (file: string) => loadCsv(file, victimRow);
export const loadHops = (file: string) => loadCsv(file, hopRow);
export const loadNodes = (file: string) => loadCsv(file, nodeRow);
export const loadLinks = (file: string) => loadCsv(file, linkRow);
export const loadCurve = (file: string) => loadCsv(file, curveRow);
