/**
 * Deterministic stand-in embeddings for image-text relevance scoring.
 *
 * The image side projects an 8x12 downsampled RGB summary through a fixed
 * seeded matrix; the text side projects a byte histogram. Both are L2
 * normalized, so their dot product is a cosine in [-1, 1]. Real model
 * backends can replace these functions; everything downstream only sees the
 * archive entries.
 */

import { bilinearResize, matVec, normalize, toFloat32 } from "./linalg.js";
import { Rng } from "./prng.js";
import type { Raster } from "./raster.js";

export const CONTENT_ROWS = 8;
export const CONTENT_COLS = 12;
export const CONTENT_LEN = CONTENT_ROWS * CONTENT_COLS * 3;
const IMAGE_PROJECTION_SEED = 0xc11f0e;
const TEXT_PROJECTION_SEED = 0x7e57e0;
const HIST_BINS = 64;

const projectionCache = new Map<string, Float64Array>();

function fixedProjection(seed: number, rows: number, cols: number): Float64Array {
  const key = `${seed}:${rows}x${cols}`;
  let m = projectionCache.get(key);
  if (!m) {
    m = new Rng(seed).gaussianArray(rows * cols, 1 / Math.sqrt(cols));
    projectionCache.set(key, m);
  }
  return m;
}

/** 8x12x3 content summary in [-1, 1], any input size. */
export function contentFeatures(image: Raster): Float64Array {
  const { width: w, height: h, pixels } = image;
  const out = new Float64Array(CONTENT_LEN);
  for (let c = 0; c < 3; c++) {
    const plane = new Float64Array(h * w);
    for (let i = 0; i < h * w; i++) plane[i] = (pixels[i * 3 + c] - 128) / 128;
    const small = bilinearResize(plane, h, w, CONTENT_ROWS, CONTENT_COLS);
    for (let i = 0; i < CONTENT_ROWS * CONTENT_COLS; i++) out[i * 3 + c] = small[i];
  }
  return out;
}

export function imageEmbedding(image: Raster, dim: number): Float32Array {
  const proj = fixedProjection(IMAGE_PROJECTION_SEED, dim, CONTENT_LEN);
  const raw = matVec(proj, dim, CONTENT_LEN, contentFeatures(image));
  // small fixed offset keeps the all-gray image from being exactly zero
  raw[0] += 1e-3;
  return toFloat32(normalize(raw));
}

export function textEmbedding(query: string, dim: number): Float32Array {
  const hist = new Float64Array(HIST_BINS);
  const bytes = Buffer.from(query.toLowerCase(), "utf-8");
  if (bytes.length === 0) throw new Error("query must be non-empty");
  for (const b of bytes) hist[b % HIST_BINS] += 1;
  for (let i = 0; i < HIST_BINS; i++) hist[i] /= bytes.length;
  const proj = fixedProjection(TEXT_PROJECTION_SEED, dim, HIST_BINS);
  return toFloat32(normalize(matVec(proj, dim, HIST_BINS, hist)));
}

/** The image-side pattern most aligned with a text embedding (A^T t). */
export function alignedContentPattern(txtEmb: ArrayLike<number>, dim: number): Float64Array {
  const proj = fixedProjection(IMAGE_PROJECTION_SEED, dim, CONTENT_LEN);
  const out = new Float64Array(CONTENT_LEN);
  for (let j = 0; j < CONTENT_LEN; j++) {
    let s = 0;
    for (let i = 0; i < dim; i++) s += proj[i * CONTENT_LEN + j] * txtEmb[i];
    out[j] = s;
  }
  return out;
}
