/**
 * Export pipeline: run the backbone on an (image, query) pair and write the
 * tensor archive the transmission core consumes, including golden reference
 * outputs (conditioned text embedding, normalized relevance map).
 */

import { readFileSync, writeFileSync } from "node:fs";

import { Archive, readArchive, tensor, writeArchive } from "./archive.js";
import type { AttentionLayer } from "./attention.js";
import type { BackboneConfig } from "./backbone.js";
import { runBackbone } from "./backbone.js";
import { imageEmbedding, textEmbedding } from "./embed.js";
import { toFloat32 } from "./linalg.js";
import type { Raster } from "./raster.js";
import { readPgm, readPpm } from "./raster.js";

export interface ExportManifest {
  imagePath: string;
  query: string;
  outPath: string;
  maskPath?: string;
  dim: number; // reference config: 1024
  proposals: number; // reference config: 100
  heads: number;
  useNorm: boolean;
  withWeights: boolean;
  clipDim: number;
  visionBackbone: string;
  textEncoder: string;
  proposalGenerator: string;
  strides: number[];
}

export function defaultManifest(imagePath: string, query: string, outPath: string): ExportManifest {
  return {
    imagePath,
    query,
    outPath,
    dim: 1024,
    proposals: 100,
    heads: 8,
    useNorm: false,
    withWeights: false,
    clipDim: 48,
    visionBackbone: "synthetic-conv (stand-in for convnext-large clip vision)",
    textEncoder: "synthetic-hist (stand-in for clip text)",
    proposalGenerator: "synthetic-proposals (stand-in for query-token decoder)",
    strides: [4, 8, 16, 32],
  };
}

function planesTensor(name: string, planes: Float64Array[], h: number, w: number) {
  const out = new Float32Array(planes.length * h * w);
  planes.forEach((plane, i) => out.set(toFloat32(plane), i * h * w));
  return tensor(name, [planes.length, h, w], out);
}

function vectorsTensor(name: string, vectors: Float64Array[]) {
  const d = vectors[0].length;
  const out = new Float32Array(vectors.length * d);
  vectors.forEach((vec, i) => out.set(toFloat32(vec), i * d));
  return tensor(name, [vectors.length, d], out);
}

function layerEntries(j: number, layer: AttentionLayer) {
  const entries = [
    tensor(`cdt_w${j}_q_w`, [layer.dim, layer.dim], toFloat32(layer.wq)),
    tensor(`cdt_w${j}_q_b`, [layer.dim], toFloat32(layer.bq)),
    tensor(`cdt_w${j}_k_w`, [layer.dim, layer.dim], toFloat32(layer.wk)),
    tensor(`cdt_w${j}_k_b`, [layer.dim], toFloat32(layer.bk)),
    tensor(`cdt_w${j}_v_w`, [layer.dim, layer.dim], toFloat32(layer.wv)),
    tensor(`cdt_w${j}_v_b`, [layer.dim], toFloat32(layer.bv)),
    tensor(`cdt_w${j}_o_w`, [layer.dim, layer.dim], toFloat32(layer.wo)),
    tensor(`cdt_w${j}_o_b`, [layer.dim], toFloat32(layer.bo)),
  ];
  if (layer.useNorm && layer.normScale && layer.normOffset) {
    entries.push(tensor(`cdt_w${j}_norm_scale`, [layer.dim], toFloat32(layer.normScale)));
    entries.push(tensor(`cdt_w${j}_norm_offset`, [layer.dim], toFloat32(layer.normOffset)));
  }
  return entries;
}

/** Shape contracts every consumer relies on; checked before writing. */
export function checkSchema(archive: Archive, h: number, w: number, cfg: BackboneConfig): void {
  const expect = (name: string, shape: number[]) => {
    const got = archive.get(name).shape;
    if (got.length !== shape.length || got.some((v, i) => v !== shape[i])) {
      throw new Error(`${name}: shape [${got}] != expected [${shape}]`);
    }
  };
  expect("e_pixel_s4", [cfg.dim, h / 4, w / 4]);
  expect("f3_s32", [cfg.dim, h / 32, w / 32]);
  expect("e_mask", [cfg.proposals, cfg.dim]);
  expect("mask_logits_s4", [cfg.proposals, h / 4, w / 4]);
  expect("v_pooled", [cfg.proposals, cfg.dim]);
  expect("t_raw", [cfg.dim]);
  expect("t_hat", [cfg.dim]);
  expect("s_inf_ref", [h, w]);
  const ref = archive.get("s_inf_ref").data as Float32Array;
  for (const v of ref) {
    if (!(v >= 0 && v <= 1)) throw new Error("s_inf_ref must lie in [0, 1]");
  }
}

export interface ExportResult {
  archive: Archive;
  bytes: number;
  image: Raster;
}

export function exportArchive(manifest: ExportManifest): ExportResult {
  if (!manifest.query.trim()) throw new Error("query must be non-empty");
  const image = readPpm(readFileSync(manifest.imagePath));
  const mask = manifest.maskPath ? readPgm(readFileSync(manifest.maskPath)) : null;
  const cfg: BackboneConfig = {
    dim: manifest.dim,
    proposals: manifest.proposals,
    heads: manifest.heads,
    useNorm: manifest.useNorm,
  };
  const out = runBackbone(image, mask, manifest.query, cfg);
  const { height: h, width: w } = image;

  const archive = new Archive();
  archive.add(planesTensor("e_pixel_s4", out.ePixel, out.hf, out.wf));
  archive.add(planesTensor("f3_s32", out.f3, out.h3, out.w3));
  archive.add(vectorsTensor("e_mask", out.eMask));
  archive.add(planesTensor("mask_logits_s4", out.logits, out.hf, out.wf));
  archive.add(vectorsTensor("v_pooled", out.vPooled));
  archive.add(tensor("t_raw", [manifest.dim], toFloat32(out.tRaw)));
  archive.add(tensor("t_hat", [manifest.dim], toFloat32(out.tHat)));
  archive.add(tensor("s_inf_ref", [h, w], toFloat32(out.sInfRef)));
  archive.add(tensor("clip_img_emb", [manifest.clipDim], imageEmbedding(image, manifest.clipDim)));
  archive.add(tensor("clip_txt_emb", [manifest.clipDim], textEmbedding(manifest.query, manifest.clipDim)));
  if (mask) {
    const bits = Uint8Array.from(mask.pixels, (v) => (v >= 128 ? 1 : 0));
    archive.add(tensor("gt_mask", [h, w], bits));
  }
  if (manifest.withWeights) {
    archive.add(tensor("cdt_heads", [1], Float32Array.of(manifest.heads)));
    archive.add(tensor("cdt_norm", [1], Float32Array.of(manifest.useNorm ? 1 : 0)));
    for (const [j, layer] of out.layers.entries()) {
      for (const entry of layerEntries(j, layer)) archive.add(entry);
    }
  }
  checkSchema(archive, h, w, cfg);
  const bytes = writeArchive(archive);
  writeFileSync(manifest.outPath, bytes);
  return { archive, bytes: bytes.length, image };
}

/** Append the reconstructed image's embedding for relevance scoring. */
export function appendReconEmbedding(archivePath: string, imagePath: string, outPath?: string): number {
  const archive = readArchive(readFileSync(archivePath));
  const recon = readPpm(readFileSync(imagePath));
  const txt = archive.get("clip_txt_emb");
  const emb = imageEmbedding(recon, txt.shape[0]);
  const updated = new Archive();
  for (const entry of archive.entries) {
    if (entry.name !== "clip_img_emb_recon") updated.add(entry);
  }
  updated.add(tensor("clip_img_emb_recon", [emb.length], emb));
  const bytes = writeArchive(updated);
  writeFileSync(outPath ?? archivePath, bytes);
  return bytes.length;
}
