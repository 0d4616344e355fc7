/**
 * Report assembly: discover persisted experiment outputs, render one decay
 * figure per experiment (plus the tail-exponent comparison and velocity
 * snapshots), and write a static HTML index.
 *
 * Rendering never touches the input directory; re-running overwrites the
 * output deterministically (no timestamps anywhere).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { CsvRow, MalformedCsvError, metricSeries, parseExperimentCsv, summaryRows } from "./csv.js";
import { parseSnapshot, velocityOnGrid } from "./snapshot.js";
import { MetricLine, RefLine, Series, logLogChart, metricTable, quiver } from "./svg.js";

const PALETTE = ["#1f5fa8", "#c04a4a", "#3a8a3a", "#8a5fb0", "#b07b2e", "#2e8a8a"];

export interface Manifest {
  experiment: string;
  config_hash: string;
  verdicts: Record<string, string>;
  diagnostics: Record<string, unknown>;
}

export interface RenderResult {
  indexPath: string;
  figures: string[];
  errors: string[];
}

export class ReportError extends Error {}

function listManifests(dir: string): string[] {
  return fs.readdirSync(dir).filter((f) => f.endsWith("_manifest.json")).sort();
}

function axisLabelFor(name: string): string {
  return name === "mdp_tail" ? "tail exponent / rate" : "estimate";
}

function decayFigure(name: string, rows: CsvRow[]): string | null {
  const series: Series[] = [];
  let i = 0;
  for (const [metric, data] of metricSeries(rows)) {
    const pts = data.filter((r) => r.estimate > 0 && r.verdict !== "censored");
    if (pts.length < 2) continue;
    series.push({
      label: metric,
      color: PALETTE[i++ % PALETTE.length],
      x: pts.map((r) => r.eps),
      y: pts.map((r) => r.estimate),
      bandLow: pts.map((r) => r.ciLow),
      bandHigh: pts.map((r) => r.ciHigh),
    });
  }
  if (series.length === 0) {
    // no eps sweep: threshold/info tables (the identity suite, one-shot
    // solves) still get one figure per the report contract
    const lines: MetricLine[] = rows.map((r) => ({
      name: r.metricName,
      estimate: r.estimate,
      bound: r.verdict === "pass" || r.verdict === "fail" ? r.ciHigh : null,
      verdict: r.verdict,
    }));
    return lines.length > 0 ? metricTable(`${name}: recorded metrics`, lines) : null;
  }
  const refs: RefLine[] = [];
  if (name === "mdp_tail") {
    const imin = summaryRows(rows).find((r) => r.metricName === "i_min");
    if (imin && imin.estimate > 0) {
      refs.push({ label: "I_min", color: "#c04a4a", y: imin.estimate });
    }
    // the exponent comparison only wants the ell series
    const ell = series.filter((s) => s.label === "ell");
    if (ell.length > 0) {
      return logLogChart(`${name}: tail exponent vs rate function`, "eps",
        axisLabelFor(name), ell, refs);
    }
  }
  return logLogChart(`${name}: decay over the eps sweep`, "eps",
    axisLabelFor(name), series, refs);
}

function verdictTable(manifests: Map<string, Manifest>): string {
  const rows: string[] = [];
  for (const [name, man] of [...manifests.entries()].sort()) {
    const verdicts = Object.entries(man.verdicts ?? {}).sort();
    const cells = verdicts.length
      ? verdicts.map(([k, v]) => `${k}: <b class="${v.includes("fail") ? "bad" : "ok"}">${v}</b>`).join("<br/>")
      : "&mdash;";
    rows.push(`<tr><td>${name}</td><td>${cells}</td></tr>`);
  }
  return `<table><tr><th>experiment</th><th>verdicts</th></tr>${rows.join("")}</table>`;
}

export function renderReport(resultsDir: string, outDir: string): RenderResult {
  if (!fs.existsSync(resultsDir) || !fs.statSync(resultsDir).isDirectory()) {
    throw new ReportError(`results directory ${resultsDir} does not exist`);
  }
  const manifestFiles = listManifests(resultsDir);
  if (manifestFiles.length === 0) {
    throw new ReportError("no experiment CSVs found");
  }
  const manifests = new Map<string, Manifest>();
  const hashes = new Map<string, string>();
  for (const mf of manifestFiles) {
    const man = JSON.parse(fs.readFileSync(path.join(resultsDir, mf), "utf8")) as Manifest;
    const name = mf.replace(/_manifest\.json$/, "");
    manifests.set(name, man);
    hashes.set(name, man.config_hash);
  }
  const unique = [...new Set(hashes.values())];
  if (unique.length > 1) {
    throw new ReportError(
      `inconsistent config hashes across experiments: ${unique.join(" vs ")}`);
  }

  fs.mkdirSync(outDir, { recursive: true });
  const figures: string[] = [];
  const errors: string[] = [];

  for (const [name] of [...manifests.entries()].sort()) {
    const csvPath = path.join(resultsDir, `${name}.csv`);
    if (!fs.existsSync(csvPath)) {
      errors.push(`${name}.csv: missing`);
      continue;
    }
    let rows: CsvRow[];
    try {
      rows = parseExperimentCsv(fs.readFileSync(csvPath, "utf8"));
    } catch (err) {
      if (err instanceof MalformedCsvError) {
        errors.push(`${name}.csv: ${err.message}`);
        continue;
      }
      throw err;
    }
    const fig = decayFigure(name, rows);
    if (fig === null) {
      errors.push(`${name}.csv: no plottable eps series`);
      continue;
    }
    const figName = `${name}.svg`;
    fs.writeFileSync(path.join(outDir, figName), fig);
    figures.push(figName);
  }

  // velocity snapshots, terminal field of each trajectory file
  const trajDir = path.join(resultsDir, "trajectories");
  if (fs.existsSync(trajDir)) {
    for (const f of fs.readdirSync(trajDir).filter((f) => f.endsWith(".bin")).sort()) {
      try {
        const snap = parseSnapshot(fs.readFileSync(path.join(trajDir, f)));
        const p = 20;
        const { u1, u2 } = velocityOnGrid(snap, snap.nSteps, p);
        const figName = `${f.replace(/\.bin$/, "")}_quiver.svg`;
        fs.writeFileSync(path.join(outDir, figName),
          quiver(`${f}: terminal velocity field`, u1, u2, p));
        figures.push(figName);
      } catch (err) {
        errors.push(`trajectories/${f}: ${(err as Error).message}`);
      }
    }
  }

  if (figures.length === 0) {
    throw new ReportError(
      `nothing could be rendered (${errors.length} error(s): ${errors.join("; ")})`);
  }

  const hash = unique[0];
  const html: string[] = [];
  html.push("<!DOCTYPE html>");
  html.push('<html><head><meta charset="utf-8"/><title>nse-mdp report</title>');
  html.push("<style>body{font-family:sans-serif;max-width:760px;margin:2em auto;}"
    + "table{border-collapse:collapse}td,th{border:1px solid #999;padding:4px 10px;"
    + "text-align:left}.ok{color:#2a7a2a}.bad{color:#b03030}figure{margin:1.5em 0}"
    + "</style></head><body>");
  html.push("<h1>nse-mdp experiment report</h1>");
  html.push(`<p>config hash <code>${hash}</code></p>`);
  html.push(verdictTable(manifests));
  for (const f of figures) {
    html.push(`<figure><img src="${f}" alt="${f}"/><figcaption>${f}</figcaption></figure>`);
  }
  if (errors.length > 0) {
    html.push("<h2>files with errors</h2><ul>");
    for (const e of errors.sort()) html.push(`<li><code>${e}</code></li>`);
    html.push("</ul>");
  }
  html.push("</body></html>");
  const indexPath = path.join(outDir, "index.html");
  fs.writeFileSync(indexPath, html.join("\n") + "\n");
  return { indexPath, figures, errors };
}
