/**
 * Experiment CSV parsing.
 *
 * Schema (one file per experiment):
 *   eps,a_eps,replicas,metric_name,estimate,ci_low,ci_high,verdict
 *
 * Values never contain commas or quotes (floats are repr()'d, names are
 * identifiers), so a line split is a faithful parser; anything that does
 * not fit the schema raises.
 */

export interface CsvRow {
  eps: number;
  aEps: number;
  replicas: number;
  metricName: string;
  estimate: number;
  ciLow: number;
  ciHigh: number;
  verdict: string;
}

export const CSV_HEADER = "eps,a_eps,replicas,metric_name,estimate,ci_low,ci_high,verdict";

export class MalformedCsvError extends Error {}

function num(field: string, text: string, line: number): number {
  if (text === "inf") return Infinity;
  if (text === "-inf") return -Infinity;
  const v = Number(text);
  if (text.trim() === "" || Number.isNaN(v)) {
    throw new MalformedCsvError(`line ${line}: bad ${field} value ${JSON.stringify(text)}`);
  }
  return v;
}

export function parseExperimentCsv(text: string): CsvRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== CSV_HEADER) {
    throw new MalformedCsvError(`missing or wrong header (expected "${CSV_HEADER}")`);
  }
  const rows: CsvRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== 8) {
      throw new MalformedCsvError(`line ${i + 1}: expected 8 fields, got ${parts.length}`);
    }
    rows.push({
      eps: num("eps", parts[0], i + 1),
      aEps: num("a_eps", parts[1], i + 1),
      replicas: Math.trunc(num("replicas", parts[2], i + 1)),
      metricName: parts[3],
      estimate: num("estimate", parts[4], i + 1),
      ciLow: num("ci_low", parts[5], i + 1),
      ciHigh: num("ci_high", parts[6], i + 1),
      verdict: parts[7],
    });
  }
  return rows;
}

/** Data rows (per-eps measurements), grouped by metric, eps descending. */
export function metricSeries(rows: CsvRow[]): Map<string, CsvRow[]> {
  const out = new Map<string, CsvRow[]>();
  for (const r of rows) {
    if (r.eps <= 0) continue; // aggregate/summary rows carry eps = 0
    if (r.metricName.includes(":")) continue;
    const list = out.get(r.metricName) ?? [];
    list.push(r);
    out.set(r.metricName, list);
  }
  for (const list of out.values()) list.sort((a, b) => b.eps - a.eps);
  return out;
}

/** Summary rows: trend/decay/factor verdicts and scalar references. */
export function summaryRows(rows: CsvRow[]): CsvRow[] {
  return rows.filter((r) => r.eps === 0);
}
