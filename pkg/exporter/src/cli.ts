/** Exporter command line: export | embed-recon. */

import { appendReconEmbedding, defaultManifest, exportArchive } from "./export.js";

function usage(): never {
  console.error(
    [
      "usage:",
      "  exporter export --image x.ppm --query 'cat and keyboard' --out x.mmta",
      "           [--mask x.mask.pgm] [--with-weights] [--dim 1024] [--proposals 100]",
      "           [--heads 8] [--norm] [--clip-dim 48]",
      "  exporter embed-recon --archive x.mmta --image recon.ppm [--out y.mmta]",
    ].join("\n"),
  );
  process.exit(2);
}

function parseFlags(argv: string[]): Map<string, string | boolean> {
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) usage();
    const name = arg.slice(2);
    if (name === "with-weights" || name === "norm") {
      flags.set(name, true);
    } else {
      const value = argv[++i];
      if (value === undefined) usage();
      flags.set(name, value);
    }
  }
  return flags;
}

function need(flags: Map<string, string | boolean>, name: string): string {
  const v = flags.get(name);
  if (typeof v !== "string") {
    console.error(`missing --${name}`);
    usage();
  }
  return v;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === "export") {
    const flags = parseFlags(rest);
    const manifest = defaultManifest(need(flags, "image"), need(flags, "query"), need(flags, "out"));
    if (flags.has("mask")) manifest.maskPath = flags.get("mask") as string;
    if (flags.has("dim")) manifest.dim = Number(flags.get("dim"));
    if (flags.has("proposals")) manifest.proposals = Number(flags.get("proposals"));
    if (flags.has("heads")) manifest.heads = Number(flags.get("heads"));
    if (flags.has("clip-dim")) manifest.clipDim = Number(flags.get("clip-dim"));
    manifest.useNorm = flags.get("norm") === true;
    manifest.withWeights = flags.get("with-weights") === true;
    const result = exportArchive(manifest);
    console.log(`wrote ${manifest.outPath}: ${result.archive.entries.length} tensors, ${result.bytes} bytes`);
    return 0;
  }
  if (command === "embed-recon") {
    const flags = parseFlags(rest);
    const bytes = appendReconEmbedding(
      need(flags, "archive"),
      need(flags, "image"),
      flags.has("out") ? (flags.get("out") as string) : undefined,
    );
    console.log(`appended clip_img_emb_recon (${bytes} bytes total)`);
    return 0;
  }
  usage();
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(1);
  }
}
