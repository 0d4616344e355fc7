#!/usr/bin/env node
/**
 * Usage:  node dist/cli.js render --in <results-dir> --out <report-dir>
 *
 * Exit codes: 0 when at least one figure renders; 1 on an empty or
 * inconsistent results directory (per-file errors are listed in the index
 * and only fail the run when nothing renders); 2 on usage errors.
 */

import { ReportError, renderReport } from "./report.js";

function parseArgs(argv: string[]): { indir: string; outdir: string } | null {
  if (argv[0] !== "render") return null;
  let indir: string | undefined;
  let outdir: string | undefined;
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const val = argv[i + 1];
    if (val === undefined) return null;
    if (key === "--in") indir = val;
    else if (key === "--out") outdir = val;
    else return null;
  }
  if (!indir || !outdir) return null;
  return { indir, outdir };
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  if (!args) {
    console.error("usage: render --in <results-dir> --out <report-dir>");
    return 2;
  }
  try {
    const res = renderReport(args.indir, args.outdir);
    console.log(`rendered ${res.figures.length} figure(s) -> ${res.indexPath}`);
    for (const e of res.errors) console.error(`warning: ${e}`);
    return 0;
  } catch (err) {
    if (err instanceof ReportError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const isMain = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}
