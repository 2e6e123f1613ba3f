/**
 * Named-tensor archive container (.mmta), float32/uint8 only.
 *
 * Layout: magic "MMTA", version u8 (=1), entry count u32le; per entry:
 * name length u8, UTF-8 name, dtype u8 (0 float32, 1 uint8), ndim u8,
 * dims u32le each, raw little-endian data. Writers are deterministic.
 */

export type Dtype = "float32" | "uint8";

export interface TensorEntry {
  name: string;
  dtype: Dtype;
  shape: number[];
  /** float32 -> Float32Array, uint8 -> Uint8Array; length = product(shape) */
  data: Float32Array | Uint8Array;
}

export const ARCHIVE_MAGIC = "MMTA";
export const ARCHIVE_VERSION = 1;

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function tensor(name: string, shape: number[], data: Float32Array | Uint8Array): TensorEntry {
  const dtype: Dtype = data instanceof Float32Array ? "float32" : "uint8";
  if (elementCount(shape) !== data.length) {
    throw new Error(`tensor ${name}: shape [${shape}] does not match ${data.length} elements`);
  }
  const nameBytes = Buffer.from(name, "utf-8");
  if (nameBytes.length === 0 || nameBytes.length > 255) {
    throw new Error(`tensor name must be 1..255 UTF-8 bytes, got ${nameBytes.length}`);
  }
  return { name, dtype, shape: [...shape], data };
}

export class Archive {
  readonly entries: TensorEntry[] = [];
  private byName = new Map<string, TensorEntry>();

  add(entry: TensorEntry): void {
    if (this.byName.has(entry.name)) {
      throw new Error(`duplicate tensor name ${entry.name}`);
    }
    this.entries.push(entry);
    this.byName.set(entry.name, entry);
  }

  has(name: string): boolean {
    return this.byName.has(name);
  }

  get(name: string): TensorEntry {
    const entry = this.byName.get(name);
    if (!entry) throw new Error(`archive has no tensor named ${name}`);
    return entry;
  }
}

export function writeArchive(archive: Archive): Buffer {
  const parts: Buffer[] = [];
  const head = Buffer.alloc(9);
  head.write(ARCHIVE_MAGIC, 0, "ascii");
  head.writeUInt8(ARCHIVE_VERSION, 4);
  head.writeUInt32LE(archive.entries.length, 5);
  parts.push(head);
  for (const entry of archive.entries) {
    const nameBytes = Buffer.from(entry.name, "utf-8");
    const meta = Buffer.alloc(1 + nameBytes.length + 2 + 4 * entry.shape.length);
    let pos = 0;
    meta.writeUInt8(nameBytes.length, pos++);
    nameBytes.copy(meta, pos);
    pos += nameBytes.length;
    meta.writeUInt8(entry.dtype === "float32" ? 0 : 1, pos++);
    meta.writeUInt8(entry.shape.length, pos++);
    for (const dim of entry.shape) {
      meta.writeUInt32LE(dim, pos);
      pos += 4;
    }
    parts.push(meta);
    if (entry.dtype === "float32") {
      const payload = Buffer.alloc(entry.data.length * 4);
      const view = new DataView(payload.buffer, payload.byteOffset);
      (entry.data as Float32Array).forEach((v, i) => view.setFloat32(i * 4, v, true));
      parts.push(payload);
    } else {
      parts.push(Buffer.from(entry.data as Uint8Array));
    }
  }
  return Buffer.concat(parts);
}

export function readArchive(data: Buffer): Archive {
  let pos = 0;
  const take = (n: number): Buffer => {
    if (pos + n > data.length) throw new Error(`truncated archive at byte ${pos}`);
    const out = data.subarray(pos, pos + n);
    pos += n;
    return out;
  };
  if (take(4).toString("ascii") !== ARCHIVE_MAGIC) throw new Error("bad archive magic");
  const version = take(1).readUInt8(0);
  if (version !== ARCHIVE_VERSION) throw new Error(`unknown archive version ${version}`);
  const count = take(4).readUInt32LE(0);
  const archive = new Archive();
  for (let i = 0; i < count; i++) {
    const nameLen = take(1).readUInt8(0);
    const name = take(nameLen).toString("utf-8");
    const code = take(1).readUInt8(0);
    if (code !== 0 && code !== 1) throw new Error(`unknown dtype code ${code}`);
    const ndim = take(1).readUInt8(0);
    const shape: number[] = [];
    for (let d = 0; d < ndim; d++) shape.push(take(4).readUInt32LE(0));
    const n = elementCount(shape);
    if (code === 0) {
      const raw = take(n * 4);
      const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
      const arr = new Float32Array(n);
      for (let k = 0; k < n; k++) arr[k] = view.getFloat32(k * 4, true);
      archive.add(tensor(name, shape, arr));
    } else {
      archive.add(tensor(name, shape, Uint8Array.from(take(n))));
    }
  }
  if (pos !== data.length) throw new Error("trailing bytes after last archive entry");
  return archive;
}
