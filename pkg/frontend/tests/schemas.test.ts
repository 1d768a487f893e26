import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import {
  SchemaMismatchError,
  loadCurve,
  loadLinks,
  loadNodes,
  loadVictims,
} from "../src/schemas.js";

const FIX = fileURLToPath(new URL("./fixtures", import.meta.url));

describe("CSV loading", () => {
  it("parses the victim trace and keeps verbatim cells", () => {
    const table = loadVictims(join(FIX, "demo/victims-seed601.csv"));
    expect(table.header).toEqual(["t_s", "victims"]);
    expect(table.rows.length).toBeGreaterThan(0);
    expect(table.rows[0]).toEqual({ t_s: 0, victims: 0 });
    expect(table.raw[0]!["t_s"]).toBe("0.000000");
  });

  it("parses nodes with empty slot/hop cells as null", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const file = join(dir, "nodes.csv");
    writeFileSync(
      file,
      "node,x_m,y_m,is_reference,slot,hop\n1,0.0,0.0,1,4,0\n2,5.0,5.0,0,,\n",
    );
    const table = loadNodes(file);
    expect(table.rows[1]).toEqual({
      node: 2,
      x_m: 5,
      y_m: 5,
      is_reference: 0,
      slot: null,
      hop: null,
    });
  });

  it("accepts extra columns (links keep channel diagnostics)", () => {
    const table = loadLinks(join(FIX, "demo/links-seed601.csv"));
    expect(table.header).toContain("snr_db");
    expect(table.rows[0]).toEqual({ node_from: 1, node_to: 2, accessible: 1 });
  });

  it("rejects a header missing a required column, naming it", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const file = join(dir, "bad.csv");
    writeFileSync(file, "t_s,count\n0.0,1\n");
    try {
      loadVictims(file);
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaMismatchError);
      const e = err as SchemaMismatchError;
      expect(e.columns).toEqual(["victims"]);
      expect(e.message).toContain("victims");
      expect(e.message).toContain(file);
    }
  });

  it("rejects an unreadable cell, naming the column", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const file = join(dir, "bad-cell.csv");
    writeFileSync(file, "t_s,probability,n_realizations\nabc,0.5,10\n");
    try {
      loadCurve(file);
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaMismatchError);
      const e = err as SchemaMismatchError;
      expect(e.columns).toEqual(["t_s"]);
      expect(e.message).toContain('column "t_s"');
      expect(e.message).toContain("row 1");
    }
  });
});
