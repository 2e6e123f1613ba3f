/**
 * Residual multi-head cross-attention used to condition the text embedding
 * on coarse visual features.
 *
 * Conventions shared with the consuming core: projections act on column
 * vectors (q = Wq @ x + bq), heads split the embedding dim into contiguous
 * blocks, scores are scaled by 1/sqrt(d/heads) and softmaxed over spatial
 * positions; optional pre-normalization (layer norm, eps 1e-5) applies to
 * the query tokens only, and the residual adds the un-normalized input.
 */

import { dot, matVec, softmaxRow } from "./linalg.js";

export const LAYERNORM_EPS = 1e-5;

export interface AttentionLayer {
  dim: number;
  heads: number;
  wq: Float64Array; // (d x d) row-major
  wk: Float64Array;
  wv: Float64Array;
  wo: Float64Array;
  bq: Float64Array; // (d)
  bk: Float64Array;
  bv: Float64Array;
  bo: Float64Array;
  useNorm: boolean;
  normScale?: Float64Array;
  normOffset?: Float64Array;
}

export function layerNorm(x: Float64Array, scale: Float64Array, offset: Float64Array): Float64Array {
  const d = x.length;
  let mean = 0;
  for (const v of x) mean += v;
  mean /= d;
  let variance = 0;
  for (const v of x) variance += (v - mean) * (v - mean);
  variance /= d;
  const inv = 1 / Math.sqrt(variance + LAYERNORM_EPS);
  const out = new Float64Array(d);
  for (let i = 0; i < d; i++) out[i] = (x[i] - mean) * inv * scale[i] + offset[i];
  return out;
}

/**
 * One residual layer for a single query token.
 * memory: S column vectors of length d, packed row-major as (S x d).
 */
export function attentionLayer(token: Float64Array, memory: Float64Array, s: number, layer: AttentionLayer): Float64Array {
  const d = layer.dim;
  if (token.length !== d) throw new Error(`token dim ${token.length} != ${d}`);
  if (d % layer.heads !== 0) throw new Error(`dim ${d} not divisible by ${layer.heads} heads`);
  const dh = d / layer.heads;

  const qIn =
    layer.useNorm && layer.normScale && layer.normOffset
      ? layerNorm(token, layer.normScale, layer.normOffset)
      : token;
  const q = matVec(layer.wq, d, d, qIn).map((v, i) => v + layer.bq[i]);
  // per-position keys/values
  const keys: Float64Array[] = [];
  const values: Float64Array[] = [];
  for (let p = 0; p < s; p++) {
    const col = memory.subarray(p * d, (p + 1) * d);
    keys.push(matVec(layer.wk, d, d, col).map((v, i) => v + layer.bk[i]));
    values.push(matVec(layer.wv, d, d, col).map((v, i) => v + layer.bv[i]));
  }
  const ctx = new Float64Array(d);
  const scale = 1 / Math.sqrt(dh);
  for (let h = 0; h < layer.heads; h++) {
    const lo = h * dh;
    const scores = new Float64Array(s);
    for (let p = 0; p < s; p++) {
      scores[p] = dot(q.subarray(lo, lo + dh), keys[p].subarray(lo, lo + dh)) * scale;
    }
    const attn = softmaxRow(scores);
    for (let p = 0; p < s; p++) {
      const v = values[p];
      for (let i = 0; i < dh; i++) ctx[lo + i] += attn[p] * v[lo + i];
    }
  }
  const out = matVec(layer.wo, d, d, ctx).map((v, i) => v + layer.bo[i]);
  return token.map((v, i) => v + out[i]);
}

/** Two-layer residual refinement of a raw text embedding. */
export function refineText(
  tRaw: Float64Array,
  memory: Float64Array,
  s: number,
  layers: [AttentionLayer, AttentionLayer],
): Float64Array {
  let tok = tRaw;
  for (const layer of layers) tok = attentionLayer(tok, memory, s, layer);
  return tok;
}
