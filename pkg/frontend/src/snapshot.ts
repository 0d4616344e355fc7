/**
 * Trajectory snapshot reader (the "NSE1" binary format).
 *
 * Little-endian layout: magic "NSE1", int64 N, int64 n_steps, float64 dt,
 * float64 nu, then for each of the n_steps+1 grid times the per-mode
 * (re, im) float64 pairs, row-major over the (2N+1)^2 index square with
 * the k = (0,0) entry skipped.  Fields decode to velocities through
 * u_hat(k) = i c(k) (-k2, k1)/|k| on the 2*pi-periodic square.
 */

export interface Snapshot {
  N: number;
  nSteps: number;
  dt: number;
  nu: number;
  /** coefficient arrays per stored time, length nSteps+1; each is
      re/im pairs in file order */
  fields: Float64Array[];
}

export class SnapshotError extends Error {}

export function parseSnapshot(buf: Buffer): Snapshot {
  if (buf.length < 36) throw new SnapshotError("truncated header");
  if (buf.toString("latin1", 0, 4) !== "NSE1") {
    throw new SnapshotError(`bad magic ${JSON.stringify(buf.toString("latin1", 0, 4))}`);
  }
  const N = Number(buf.readBigInt64LE(4));
  const nSteps = Number(buf.readBigInt64LE(12));
  const dt = buf.readDoubleLE(20);
  const nu = buf.readDoubleLE(28);
  if (N < 1 || nSteps < 0) throw new SnapshotError(`implausible header N=${N} n_steps=${nSteps}`);
  const nModes = (2 * N + 1) ** 2 - 1;
  const perField = nModes * 2 * 8;
  const expected = 36 + (nSteps + 1) * perField;
  if (buf.length !== expected) {
    throw new SnapshotError(`payload is ${buf.length} bytes, expected ${expected}`);
  }
  const fields: Float64Array[] = [];
  for (let s = 0; s <= nSteps; s++) {
    const off = 36 + s * perField;
    const arr = new Float64Array(nModes * 2);
    for (let j = 0; j < nModes * 2; j++) arr[j] = buf.readDoubleLE(off + j * 8);
    fields.push(arr);
  }
  return { N, nSteps, dt, nu, fields };
}

/** Mode list (k1, k2) in file order: row-major, zero mode skipped. */
export function modeOrder(N: number): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let k1 = -N; k1 <= N; k1++) {
    for (let k2 = -N; k2 <= N; k2++) {
      if (k1 === 0 && k2 === 0) continue;
      out.push([k1, k2]);
    }
  }
  return out;
}

/**
 * Evaluate the velocity of one stored field on a p x p physical grid
 * covering [0, 2*pi)^2.  Direct mode sum; fine for the small bases the
 * toolkit uses.
 */
export function velocityOnGrid(snap: Snapshot, fieldIndex: number, p: number):
    { u1: Float64Array; u2: Float64Array } {
  const modes = modeOrder(snap.N);
  const c = snap.fields[fieldIndex];
  const u1 = new Float64Array(p * p);
  const u2 = new Float64Array(p * p);
  for (let m = 0; m < modes.length; m++) {
    const [k1, k2] = modes[m];
    const re = c[2 * m];
    const im = c[2 * m + 1];
    if (re === 0 && im === 0) continue;
    const norm = Math.hypot(k1, k2);
    // u_hat = i c k_perp/|k|, k_perp = (-k2, k1)
    const e1 = -k2 / norm;
    const e2 = k1 / norm;
    for (let i = 0; i < p; i++) {
      const x1 = (2 * Math.PI * i) / p;
      for (let j = 0; j < p; j++) {
        const x2 = (2 * Math.PI * j) / p;
        const phase = k1 * x1 + k2 * x2;
        // Re[(i re - im)(cos + i sin)] = -re sin - im cos
        const s = -re * Math.sin(phase) - im * Math.cos(phase);
        u1[i * p + j] += s * e1;
        u2[i * p + j] += s * e2;
      }
    }
  }
  return { u1, u2 };
}
