import { describe, expect, it } from "vitest";

import { CSV_HEADER, MalformedCsvError, metricSeries, parseExperimentCsv, summaryRows } from "../src/csv.js";

const SAMPLE = [
  CSV_HEADER,
  "0.1,0.39810717055349726,200,gap_sup_plus_int,4.5,4.1,4.9,",
  "0.01,0.15848931924611134,200,gap_sup_plus_int,0.43,0.40,0.46,",
  "0.001,0.0630957344480193,200,gap_sup_plus_int,0.048,0.045,0.051,",
  "0.0,0.0,200,trend:gap_sup_plus_int,1.0,0.0,0.0,pass",
].join("\n") + "\n";

describe("parseExperimentCsv", () => {
  it("parses the schema", () => {
    const rows = parseExperimentCsv(SAMPLE);
    expect(rows).toHaveLength(4);
    expect(rows[0].eps).toBe(0.1);
    expect(rows[0].aEps).toBeCloseTo(0.1 ** 0.4, 12);
    expect(rows[0].replicas).toBe(200);
    expect(rows[3].verdict).toBe("pass");
  });

  it("rejects a wrong header", () => {
    expect(() => parseExperimentCsv("a,b,c\n1,2,3\n")).toThrow(MalformedCsvError);
  });

  it("rejects short rows and non-numeric fields", () => {
    expect(() => parseExperimentCsv(CSV_HEADER + "\n1,2,3\n")).toThrow(MalformedCsvError);
    expect(() => parseExperimentCsv(CSV_HEADER + "\nx,0,1,m,1,1,1,\n")).toThrow(MalformedCsvError);
  });

  it("accepts inf cells (censored tail rows)", () => {
    const rows = parseExperimentCsv(CSV_HEADER + "\n0.1,0.4,10,ell,2.0,0.0,inf,censored\n");
    expect(rows[0].ciHigh).toBe(Infinity);
  });
});

describe("metricSeries", () => {
  it("groups per-eps rows by metric, eps descending, skipping summaries", () => {
    const rows = parseExperimentCsv(SAMPLE);
    const series = metricSeries(rows);
    expect([...series.keys()]).toEqual(["gap_sup_plus_int"]);
    expect(series.get("gap_sup_plus_int")!.map((r) => r.eps)).toEqual([0.1, 0.01, 0.001]);
    expect(summaryRows(rows)).toHaveLength(1);
  });
});
