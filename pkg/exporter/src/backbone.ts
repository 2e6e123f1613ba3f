/**
 * Synthetic deterministic backbone.
 *
 * Stands in for the pretrained vision-language stack when no weights are
 * available: it fabricates embedding tensors whose geometry matches the real
 * exporters' contracts (stride-4 pixel grid, stride-32 coarse grid, N
 * proposal embeddings) and whose content correlates with the query mask, so
 * the derived relevance map highlights the masked region. Every derived
 * tensor (logits, pooled features, conditioned text, reference map) is
 * computed here in float64, independent of any consumer.
 */

import type { AttentionLayer } from "./attention.js";
import { refineText } from "./attention.js";
import {
  bilinearResize,
  blockMean,
  dot,
  minMaxNormalize,
  normalize,
  sigmoidPlane,
} from "./linalg.js";
import { fnv1a, Rng } from "./prng.js";
import type { Raster } from "./raster.js";

const POOL_EPS = 1e-6;
const CONTENT_PROJ_SEED = 0xfea70a;

export interface BackboneConfig {
  dim: number; // fusion embedding dim (reference config: 1024)
  proposals: number; // N (reference config: 100)
  heads: number;
  useNorm: boolean;
}

export interface BackboneOutput {
  hf: number;
  wf: number;
  h3: number;
  w3: number;
  ePixel: Float64Array[]; // d planes of (hf x wf)
  f3: Float64Array[]; // d planes of (h3 x w3)
  eMask: Float64Array[]; // N vectors of length d
  logits: Float64Array[]; // N planes of (hf x wf)
  vPooled: Float64Array[]; // N vectors of length d
  tRaw: Float64Array;
  tHat: Float64Array;
  sInfRef: Float64Array; // normalized (h x w)
  layers: [AttentionLayer, AttentionLayer];
}

function randomLayer(dim: number, heads: number, useNorm: boolean, rng: Rng): AttentionLayer {
  const mat = () => rng.gaussianArray(dim * dim, 0.08);
  const bias = () => rng.gaussianArray(dim, 0.02);
  return {
    dim,
    heads,
    wq: mat(),
    wk: mat(),
    wv: mat(),
    wo: mat(),
    bq: bias(),
    bk: bias(),
    bv: bias(),
    bo: bias(),
    useNorm,
    normScale: useNorm ? rng.gaussianArray(dim, 0.05).map((v) => 1 + v) : undefined,
    normOffset: useNorm ? rng.gaussianArray(dim, 0.02) : undefined,
  };
}

export function runBackbone(
  image: Raster,
  maskGray: Raster | null,
  query: string,
  cfg: BackboneConfig,
): BackboneOutput {
  const { width: w, height: h } = image;
  if (h % 32 !== 0 || w % 32 !== 0) {
    throw new Error(`image ${w}x${h} must be divisible by the coarsest stride 32`);
  }
  const d = cfg.dim;
  const n = cfg.proposals;
  const hf = h / 4;
  const wf = w / 4;
  const h3 = h / 32;
  const w3 = w / 32;

  const rng = new Rng((fnv1a(query) ^ fnv1a(image.pixels)) >>> 0);
  const queryDir = normalize(new Rng(fnv1a(query)).gaussianArray(d));

  // mask support on the stride-4 grid
  const maskPlane = new Float64Array(h * w);
  if (maskGray) {
    if (maskGray.width !== w || maskGray.height !== h) {
      throw new Error("mask dims differ from image dims");
    }
    for (let i = 0; i < h * w; i++) maskPlane[i] = maskGray.pixels[i] >= 128 ? 1 : 0;
  }
  const m4 = blockMean(maskPlane, h, w, 4, 4);

  // stride-4 RGB means feed a fixed content projection
  const contentProj = new Rng(CONTENT_PROJ_SEED).gaussianArray(d * 3, 0.25);
  const rgb4: Float64Array[] = [];
  for (let c = 0; c < 3; c++) {
    const plane = new Float64Array(h * w);
    for (let i = 0; i < h * w; i++) plane[i] = (image.pixels[i * 3 + c] - 128) / 128;
    rgb4.push(blockMean(plane, h, w, 4, 4));
  }

  const ePixel: Float64Array[] = [];
  for (let k = 0; k < d; k++) {
    const plane = rng.gaussianArray(hf * wf, 0.15);
    for (let i = 0; i < hf * wf; i++) {
      const content =
        contentProj[k * 3] * rgb4[0][i] +
        contentProj[k * 3 + 1] * rgb4[1][i] +
        contentProj[k * 3 + 2] * rgb4[2][i];
      plane[i] += 1.2 * queryDir[k] * m4[i] + content;
    }
    ePixel.push(plane);
  }
  const f3 = ePixel.map((plane) => blockMean(plane, hf, wf, 8, 8));

  const eMask: Float64Array[] = [];
  for (let i = 0; i < n; i++) {
    const vec = rng.gaussianArray(d, 0.35);
    if (i < 3) for (let k = 0; k < d; k++) vec[k] = 0.8 * queryDir[k] + 0.4 * vec[k];
    eMask.push(vec);
  }

  const logits: Float64Array[] = [];
  for (let i = 0; i < n; i++) {
    const plane = new Float64Array(hf * wf);
    for (let p = 0; p < hf * wf; p++) {
      let s = 0;
      for (let k = 0; k < d; k++) s += eMask[i][k] * ePixel[k][p];
      plane[p] = s;
    }
    logits.push(plane);
  }

  // pooled proposal features over the coarse grid
  const vPooled: Float64Array[] = [];
  for (let i = 0; i < n; i++) {
    const coarse = sigmoidPlane(bilinearResize(logits[i], hf, wf, h3, w3));
    let den = POOL_EPS;
    for (const v of coarse) den += v;
    const vec = new Float64Array(d);
    for (let k = 0; k < d; k++) {
      let s = 0;
      for (let p = 0; p < h3 * w3; p++) s += coarse[p] * f3[k][p];
      vec[k] = s / den;
    }
    vPooled.push(vec);
  }

  const tRaw = new Float64Array(d);
  const tNoise = rng.gaussianArray(d, 0.2);
  for (let k = 0; k < d; k++) tRaw[k] = queryDir[k] + tNoise[k];

  const weightRng = new Rng((fnv1a(query) ^ 0x5eed5) >>> 0);
  const layers: [AttentionLayer, AttentionLayer] = [
    randomLayer(d, cfg.heads, cfg.useNorm, weightRng),
    randomLayer(d, cfg.heads, cfg.useNorm, weightRng),
  ];
  // memory: spatial positions (row-major) as column vectors of f3
  const memory = new Float64Array(h3 * w3 * d);
  for (let p = 0; p < h3 * w3; p++) {
    for (let k = 0; k < d; k++) memory[p * d + k] = f3[k][p];
  }
  const tHat = refineText(tRaw, memory, h3 * w3, layers);

  const raw = new Float64Array(h * w);
  for (let i = 0; i < n; i++) {
    const up = bilinearResize(sigmoidPlane(logits[i]), hf, wf, h, w);
    const weight = dot(tHat, vPooled[i]);
    for (let p = 0; p < h * w; p++) raw[p] += weight * up[p];
  }
  const sInfRef = minMaxNormalize(raw);

  return { hf, wf, h3, w3, ePixel, f3, eMask, logits, vPooled, tRaw, tHat, sInfRef, layers };
}
