/**
 * Build the committed parity fixtures: for each scene, a PPM image whose
 * object region carries content aligned with the query's text embedding, a
 * PGM ground-truth mask, and an exported archive with golden outputs.
 *
 * Each fixture is checked before it is written: the original image must
 * score a higher image-text cosine than an all-gray frame, and the relevance
 * reference must peak inside the mask.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { bilinearResize, dot } from "./linalg.js";
import { alignedContentPattern, CONTENT_COLS, CONTENT_ROWS, imageEmbedding, textEmbedding } from "./embed.js";
import { exportArchive, defaultManifest } from "./export.js";
import { Rng, fnv1a } from "./prng.js";
import type { Raster } from "./raster.js";
import { writePgm, writePpm } from "./raster.js";

interface SceneSpec {
  name: string;
  query: string;
  height: number;
  width: number;
  heads: number;
  useNorm: boolean;
  shapes: Array<{ kind: "ellipse" | "rect"; cy: number; cx: number; ry: number; rx: number }>;
}

const SCENES: SceneSpec[] = [
  {
    name: "mug",
    query: "red mug",
    height: 64,
    width: 96,
    heads: 4,
    useNorm: false,
    shapes: [{ kind: "ellipse", cy: 0.55, cx: 0.4, ry: 0.24, rx: 0.18 }],
  },
  {
    name: "cat_keyboard",
    query: "cat and keyboard",
    height: 64,
    width: 96,
    heads: 4,
    useNorm: true,
    shapes: [
      { kind: "ellipse", cy: 0.35, cx: 0.28, ry: 0.2, rx: 0.14 },
      { kind: "rect", cy: 0.72, cx: 0.68, ry: 0.1, rx: 0.22 },
    ],
  },
  {
    name: "sign",
    query: "traffic sign",
    height: 96,
    width: 128,
    heads: 2,
    useNorm: false,
    shapes: [{ kind: "ellipse", cy: 0.32, cx: 0.6, ry: 0.18, rx: 0.14 }],
  },
];

const FUSION_DIM = 32;
const PROPOSALS = 8;
const CLIP_DIM = 48;

function buildMask(spec: SceneSpec): Uint8Array {
  const { height: h, width: w } = spec;
  const mask = new Uint8Array(h * w);
  for (const s of spec.shapes) {
    const cy = s.cy * h;
    const cx = s.cx * w;
    const ry = s.ry * h;
    const rx = s.rx * w;
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const dy = (y - cy) / ry;
        const dx = (x - cx) / rx;
        const inside = s.kind === "ellipse" ? dy * dy + dx * dx <= 1 : Math.abs(dy) <= 1 && Math.abs(dx) <= 1;
        if (inside) mask[y * w + x] = 255;
      }
    }
  }
  return mask;
}

function buildImage(spec: SceneSpec, mask: Uint8Array, styleSeed: number): Raster {
  const { height: h, width: w } = spec;
  const rng = new Rng((fnv1a(spec.name) ^ styleSeed) >>> 0);
  const txt = textEmbedding(spec.query, CLIP_DIM);
  const pattern = alignedContentPattern(txt, CLIP_DIM);
  let maxAbs = 0;
  for (const v of pattern) maxAbs = Math.max(maxAbs, Math.abs(v));

  // upsample the aligned 8x12x3 pattern to image resolution per channel
  const aligned: Float64Array[] = [];
  for (let c = 0; c < 3; c++) {
    const small = new Float64Array(CONTENT_ROWS * CONTENT_COLS);
    for (let i = 0; i < small.length; i++) small[i] = pattern[i * 3 + c] / maxAbs;
    aligned.push(bilinearResize(small, CONTENT_ROWS, CONTENT_COLS, h, w));
  }

  const base = [rng.int(96, 160), rng.int(96, 160), rng.int(96, 160)];
  const pixels = new Uint8Array(h * w * 3);
  for (let p = 0; p < h * w; p++) {
    const inside = mask[p] >= 128;
    for (let c = 0; c < 3; c++) {
      let v: number;
      if (inside) {
        v = 128 + 115 * aligned[c][p] + rng.gaussian() * 18;
      } else {
        v = base[c] + rng.gaussian() * 10;
      }
      pixels[p * 3 + c] = Math.max(0, Math.min(255, Math.round(v)));
    }
  }
  return { width: w, height: h, channels: 3, pixels };
}

function grayImage(h: number, w: number): Raster {
  return { width: w, height: h, channels: 3, pixels: new Uint8Array(h * w * 3).fill(128) };
}

function maskedMean(map: Float32Array, mask: Uint8Array, wantInside: boolean): number {
  let sum = 0;
  let count = 0;
  for (let i = 0; i < map.length; i++) {
    if ((mask[i] >= 128) === wantInside) {
      sum += map[i];
      count++;
    }
  }
  return sum / count;
}

export function makeFixtures(outDir: string): void {
  mkdirSync(outDir, { recursive: true });
  const report: object[] = [];
  for (const spec of SCENES) {
    const mask = buildMask(spec);
    let fixture: { cosOrig: number; cosGray: number; styleSeed: number } | null = null;
    for (let styleSeed = 1; styleSeed <= 25 && !fixture; styleSeed++) {
      const image = buildImage(spec, mask, styleSeed);
      const txt = textEmbedding(spec.query, CLIP_DIM);
      const cosOrig = dot(imageEmbedding(image, CLIP_DIM), txt);
      const cosGray = dot(imageEmbedding(grayImage(spec.height, spec.width), CLIP_DIM), txt);
      if (cosOrig <= cosGray + 0.05) continue; // curated: original must outscore gray

      const imagePath = join(outDir, `${spec.name}.ppm`);
      const maskPath = join(outDir, `${spec.name}.mask.pgm`);
      writeFileSync(imagePath, writePpm(image));
      writeFileSync(maskPath, writePgm({ width: spec.width, height: spec.height, channels: 1, pixels: mask }));

      const manifest = defaultManifest(imagePath, spec.query, join(outDir, `${spec.name}.mmta`));
      manifest.maskPath = maskPath;
      manifest.dim = FUSION_DIM;
      manifest.proposals = PROPOSALS;
      manifest.heads = spec.heads;
      manifest.useNorm = spec.useNorm;
      manifest.withWeights = true;
      manifest.clipDim = CLIP_DIM;
      const result = exportArchive(manifest);

      const ref = result.archive.get("s_inf_ref").data as Float32Array;
      const inside = maskedMean(ref, mask, true);
      const outside = maskedMean(ref, mask, false);
      if (inside <= outside + 0.2) continue; // reference map must peak in the mask

      fixture = { cosOrig, cosGray, styleSeed };
      report.push({
        name: spec.name,
        query: spec.query,
        size: `${spec.width}x${spec.height}`,
        dim: FUSION_DIM,
        proposals: PROPOSALS,
        heads: spec.heads,
        useNorm: spec.useNorm,
        styleSeed,
        cosineOriginal: Number(cosOrig.toFixed(4)),
        cosineGray: Number(cosGray.toFixed(4)),
        relevanceInsideMean: Number(inside.toFixed(4)),
        relevanceOutsideMean: Number(outside.toFixed(4)),
      });
    }
    if (!fixture) throw new Error(`could not curate fixture ${spec.name}`);
  }
  writeFileSync(join(outDir, "manifest.json"), JSON.stringify(report, null, 2) + "\n");
  console.log(JSON.stringify(report, null, 2));
}

if (process.argv[1] && process.argv[1].endsWith("make_fixtures.js")) {
  makeFixtures(process.argv[2] ?? "../fixtures");
}
