/**
 * Dense float64 helpers on flat row-major arrays.
 *
 * Grids are indexed [y * w + x]; stacks of planes use an outer length-N
 * array. Bilinear resampling is corner-aligned and uses the lerp form
 * a + t*(b-a) so constant planes are exact fixed points.
 */

export function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

export function sigmoidPlane(plane: Float64Array): Float64Array {
  return plane.map((v) => sigmoid(v));
}

export function dot(a: ArrayLike<number>, b: ArrayLike<number>): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

export function norm(a: ArrayLike<number>): number {
  return Math.sqrt(dot(a, a));
}

export function normalize(a: Float64Array): Float64Array {
  const n = norm(a);
  if (n === 0) throw new Error("cannot normalize a zero vector");
  return a.map((v) => v / n);
}

/** y = M @ x for an (rows x cols) row-major matrix and a column vector x. */
export function matVec(m: Float64Array, rows: number, cols: number, x: ArrayLike<number>): Float64Array {
  const out = new Float64Array(rows);
  for (let r = 0; r < rows; r++) {
    let s = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) s += m[base + c] * x[c];
    out[r] = s;
  }
  return out;
}

export function softmaxRow(row: Float64Array): Float64Array {
  let max = -Infinity;
  for (const v of row) max = Math.max(max, v);
  const e = row.map((v) => Math.exp(v - max));
  let sum = 0;
  for (const v of e) sum += v;
  return e.map((v) => v / sum);
}

export function bilinearResize(
  plane: Float64Array,
  srcH: number,
  srcW: number,
  outH: number,
  outW: number,
): Float64Array {
  const coord = (i: number, outN: number, srcN: number): number =>
    outN === 1 || srcN === 1 ? 0 : (i * (srcN - 1)) / (outN - 1);
  const out = new Float64Array(outH * outW);
  for (let i = 0; i < outH; i++) {
    const y = coord(i, outH, srcH);
    const y0 = Math.min(Math.floor(y), srcH - 1);
    const y1 = Math.min(y0 + 1, srcH - 1);
    const wy = y - y0;
    for (let j = 0; j < outW; j++) {
      const x = coord(j, outW, srcW);
      const x0 = Math.min(Math.floor(x), srcW - 1);
      const x1 = Math.min(x0 + 1, srcW - 1);
      const wx = x - x0;
      const a = plane[y0 * srcW + x0];
      const b = plane[y0 * srcW + x1];
      const c = plane[y1 * srcW + x0];
      const d = plane[y1 * srcW + x1];
      const top = a + wx * (b - a);
      const bot = c + wx * (d - c);
      out[i * outW + j] = top + wy * (bot - top);
    }
  }
  return out;
}

/** Block-mean downsample of a (srcH x srcW) plane by integer factors. */
export function blockMean(
  plane: Float64Array,
  srcH: number,
  srcW: number,
  factorY: number,
  factorX: number,
): Float64Array {
  const outH = srcH / factorY;
  const outW = srcW / factorX;
  if (!Number.isInteger(outH) || !Number.isInteger(outW)) {
    throw new Error(`plane ${srcH}x${srcW} not divisible by ${factorY}x${factorX}`);
  }
  const out = new Float64Array(outH * outW);
  for (let i = 0; i < outH; i++) {
    for (let j = 0; j < outW; j++) {
      let s = 0;
      for (let dy = 0; dy < factorY; dy++) {
        for (let dx = 0; dx < factorX; dx++) {
          s += plane[(i * factorY + dy) * srcW + (j * factorX + dx)];
        }
      }
      out[i * outW + j] = s / (factorY * factorX);
    }
  }
  return out;
}

export function toFloat32(a: Float64Array | number[]): Float32Array {
  return Float32Array.from(a);
}

export function minMaxNormalize(plane: Float64Array): Float64Array {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of plane) {
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  if (hi === lo) return new Float64Array(plane.length).fill(0.5);
  return plane.map((v) => (v - lo) / (hi - lo));
}
