/**
 * Minimal deterministic SVG builder: log-log line charts with confidence
 * bands, horizontal reference lines, and quiver (arrow) fields.
 *
 * No timestamps, no randomness: byte-identical inputs give byte-identical
 * figures.
 */

export interface Series {
  label: string;
  color: string;
  x: number[];
  y: number[];
  bandLow?: number[];
  bandHigh?: number[];
}

export interface RefLine {
  label: string;
  color: string;
  y: number;
}

const W = 640;
const H = 420;
const ML = 70;
const MR = 20;
const MT = 36;
const MB = 56;

const fmt = (v: number): string => {
  if (!Number.isFinite(v)) return "0";
  const s = v.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "").replace(/\.$/, "") : s;
};

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  const e0 = Math.floor(Math.log10(lo));
  const e1 = Math.ceil(Math.log10(hi));
  for (let e = e0; e <= e1; e++) {
    const v = Math.pow(10, e);
    if (v >= lo / 1.0001 && v <= hi * 1.0001) out.push(v);
  }
  if (out.length < 2) return [lo, hi];
  return out;
}

function tickLabel(v: number): string {
  const e = Math.log10(v);
  if (Number.isInteger(e)) return e >= -3 && e <= 3 ? fmt(v) : `1e${e}`;
  return fmt(v);
}

export function logLogChart(title: string, xLabel: string, yLabel: string,
                            series: Series[], refs: RefLine[] = []): string {
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => [
    ...s.y, ...(s.bandLow ?? []), ...(s.bandHigh ?? []),
  ]).concat(refs.map((r) => r.y)).filter((v) => v > 0 && Number.isFinite(v));
  const xlo = Math.min(...xs); const xhi = Math.max(...xs);
  let ylo = Math.min(...ys); let yhi = Math.max(...ys);
  if (!(ylo > 0)) { ylo = 1e-12; yhi = 1; }
  if (ylo === yhi) { ylo /= 2; yhi *= 2; }
  const px = (x: number) => ML + ((Math.log10(x) - Math.log10(xlo)) /
    (Math.log10(xhi) - Math.log10(xlo) || 1)) * (W - ML - MR);
  const py = (y: number) => H - MB - ((Math.log10(y) - Math.log10(ylo)) /
    (Math.log10(yhi) - Math.log10(ylo) || 1)) * (H - MT - MB);

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="20" text-anchor="middle" font-size="15">${esc(title)}</text>`);

  for (const t of logTicks(xlo, xhi)) {
    const x = px(t);
    parts.push(`<line x1="${fmt(x)}" y1="${MT}" x2="${fmt(x)}" y2="${H - MB}" stroke="#e0e0e0"/>`);
    parts.push(`<text x="${fmt(x)}" y="${H - MB + 18}" text-anchor="middle" font-size="11">${tickLabel(t)}</text>`);
  }
  for (const t of logTicks(ylo, yhi)) {
    const y = py(t);
    parts.push(`<line x1="${ML}" y1="${fmt(y)}" x2="${W - MR}" y2="${fmt(y)}" stroke="#e0e0e0"/>`);
    parts.push(`<text x="${ML - 6}" y="${fmt(y + 4)}" text-anchor="end" font-size="11">${tickLabel(t)}</text>`);
  }
  parts.push(`<rect x="${ML}" y="${MT}" width="${W - ML - MR}" height="${H - MT - MB}" fill="none" stroke="#404040"/>`);
  parts.push(`<text x="${W / 2}" y="${H - 14}" text-anchor="middle" font-size="13">${esc(xLabel)}</text>`);
  parts.push(`<text x="18" y="${H / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${H / 2})">${esc(yLabel)}</text>`);

  for (const s of series) {
    if (s.bandLow && s.bandHigh) {
      const up = s.x.map((x, i) => `${fmt(px(x))},${fmt(py(Math.max(s.bandHigh![i], ylo)))}`);
      const dn = s.x.map((x, i) => `${fmt(px(x))},${fmt(py(Math.max(s.bandLow![i], ylo)))}`).reverse();
      parts.push(`<polygon points="${[...up, ...dn].join(" ")}" fill="${s.color}" fill-opacity="0.15" stroke="none"/>`);
    }
    const pts = s.x.map((x, i) => `${fmt(px(x))},${fmt(py(Math.max(s.y[i], ylo)))}`);
    parts.push(`<polyline points="${pts.join(" ")}" fill="none" stroke="${s.color}" stroke-width="2"/>`);
    for (const p of pts) {
      const [cx, cy] = p.split(",");
      parts.push(`<circle cx="${cx}" cy="${cy}" r="3.5" fill="${s.color}"/>`);
    }
  }
  for (const r of refs) {
    const y = py(r.y);
    parts.push(`<line x1="${ML}" y1="${fmt(y)}" x2="${W - MR}" y2="${fmt(y)}" stroke="${r.color}" stroke-width="2" stroke-dasharray="8 4"/>`);
  }

  let ly = MT + 14;
  for (const s of series) {
    parts.push(`<line x1="${W - MR - 150}" y1="${ly - 4}" x2="${W - MR - 126}" y2="${ly - 4}" stroke="${s.color}" stroke-width="2"/>`);
    parts.push(`<text x="${W - MR - 120}" y="${ly}" font-size="11">${esc(s.label)}</text>`);
    ly += 16;
  }
  for (const r of refs) {
    parts.push(`<line x1="${W - MR - 150}" y1="${ly - 4}" x2="${W - MR - 126}" y2="${ly - 4}" stroke="${r.color}" stroke-width="2" stroke-dasharray="8 4"/>`);
    parts.push(`<text x="${W - MR - 120}" y="${ly}" font-size="11">${esc(r.label)} = ${fmt(r.y)}</text>`);
    ly += 16;
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export interface MetricLine {
  name: string;
  estimate: number;
  bound: number | null;
  verdict: string;
}

/** Table figure for experiments without an eps sweep (threshold suites). */
export function metricTable(title: string, lines: MetricLine[]): string {
  const rowH = 24;
  const height = 70 + rowH * lines.length;
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${height}" viewBox="0 0 ${W} ${height}" font-family="monospace">`);
  parts.push(`<rect width="${W}" height="${height}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">${esc(title)}</text>`);
  parts.push(`<text x="24" y="48" font-size="12" fill="#555555">metric</text>`);
  parts.push(`<text x="${W - 240}" y="48" font-size="12" fill="#555555" text-anchor="end">value</text>`);
  parts.push(`<text x="${W - 130}" y="48" font-size="12" fill="#555555" text-anchor="end">bound</text>`);
  parts.push(`<text x="${W - 40}" y="48" font-size="12" fill="#555555" text-anchor="end">verdict</text>`);
  lines.forEach((m, i) => {
    const y = 70 + i * rowH;
    const color = m.verdict.includes("fail") ? "#b03030"
      : m.verdict === "pass" ? "#2a7a2a" : "#555555";
    parts.push(`<text x="24" y="${y}" font-size="12">${esc(m.name)}</text>`);
    parts.push(`<text x="${W - 240}" y="${y}" font-size="12" text-anchor="end">${m.estimate.toExponential(3)}</text>`);
    parts.push(`<text x="${W - 130}" y="${y}" font-size="12" text-anchor="end">${m.bound === null ? "-" : m.bound.toExponential(1)}</text>`);
    parts.push(`<text x="${W - 40}" y="${y}" font-size="12" text-anchor="end" fill="${color}">${esc(m.verdict || "-")}</text>`);
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

/** Arrow plot of a velocity field sampled on a p x p grid over the torus. */
export function quiver(title: string, u1: Float64Array, u2: Float64Array,
                       p: number): string {
  const S = 480;
  const M = 40;
  let vmax = 1e-12;
  for (let i = 0; i < u1.length; i++) vmax = Math.max(vmax, Math.hypot(u1[i], u2[i]));
  const cell = (S - 2 * M) / p;
  const scale = (0.85 * cell) / vmax;
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${S}" height="${S + 24}" viewBox="0 0 ${S} ${S + 24}" font-family="sans-serif">`);
  parts.push(`<rect width="${S}" height="${S + 24}" fill="white"/>`);
  parts.push(`<text x="${S / 2}" y="18" text-anchor="middle" font-size="14">${esc(title)}</text>`);
  parts.push(`<rect x="${M}" y="${M}" width="${S - 2 * M}" height="${S - 2 * M}" fill="none" stroke="#404040"/>`);
  for (let i = 0; i < p; i++) {
    for (let j = 0; j < p; j++) {
      // x1 is the row coordinate; draw it horizontally, x2 vertically (up)
      const cx = M + (i + 0.5) * cell;
      const cy = S - M - (j + 0.5) * cell;
      const dx = u1[i * p + j] * scale;
      const dy = -u2[i * p + j] * scale;
      const len = Math.hypot(dx, dy);
      if (len < 0.02 * cell) {
        parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="1" fill="#666666"/>`);
        continue;
      }
      const hx = cx + dx; const hy = cy + dy;
      const a = Math.atan2(dy, dx);
      const barb = Math.min(4, len / 2);
      const b1x = hx - barb * Math.cos(a - 0.5);
      const b1y = hy - barb * Math.sin(a - 0.5);
      const b2x = hx - barb * Math.cos(a + 0.5);
      const b2y = hy - barb * Math.sin(a + 0.5);
      parts.push(`<line x1="${fmt(cx)}" y1="${fmt(cy)}" x2="${fmt(hx)}" y2="${fmt(hy)}" stroke="#1f5fa8" stroke-width="1.2"/>`);
      parts.push(`<polyline points="${fmt(b1x)},${fmt(b1y)} ${fmt(hx)},${fmt(hy)} ${fmt(b2x)},${fmt(b2y)}" fill="none" stroke="#1f5fa8" stroke-width="1.2"/>`);
    }
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
