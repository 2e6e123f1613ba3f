/** Binary PPM (P6) and PGM (P5) readers/writers, maxval 255. */

export interface Raster {
  width: number;
  height: number;
  channels: 1 | 3;
  pixels: Uint8Array; // row-major, interleaved
}

function parseHeader(data: Buffer, magic: string): { width: number; height: number; offset: number } {
  if (data.subarray(0, 2).toString("ascii") !== magic) {
    throw new Error(`unsupported raster format, expected ${magic}`);
  }
  let pos = 2;
  const fields: number[] = [];
  let token = "";
  while (fields.length < 3) {
    if (pos >= data.length) throw new Error("truncated raster header");
    const c = data[pos++];
    if (c === 0x23) {
      // '#' comment to end of line
      while (pos < data.length && data[pos] !== 0x0a && data[pos] !== 0x0d) pos++;
      continue;
    }
    if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      if (token) {
        fields.push(Number.parseInt(token, 10));
        token = "";
      }
      continue;
    }
    if (c < 0x30 || c > 0x39) throw new Error(`bad raster header byte ${c}`);
    token += String.fromCharCode(c);
  }
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  return { width, height, offset: pos };
}

export function readPpm(data: Buffer): Raster {
  const { width, height, offset } = parseHeader(data, "P6");
  const n = width * height * 3;
  if (data.length - offset !== n) throw new Error("PPM pixel data length mismatch");
  return { width, height, channels: 3, pixels: Uint8Array.from(data.subarray(offset)) };
}

export function writePpm(img: Raster): Buffer {
  if (img.channels !== 3) throw new Error("writePpm needs 3 channels");
  const header = Buffer.from(`P6 ${img.width} ${img.height} 255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.pixels)]);
}

export function readPgm(data: Buffer): Raster {
  const { width, height, offset } = parseHeader(data, "P5");
  const n = width * height;
  if (data.length - offset !== n) throw new Error("PGM pixel data length mismatch");
  return { width, height, channels: 1, pixels: Uint8Array.from(data.subarray(offset)) };
}

export function writePgm(img: Raster): Buffer {
  if (img.channels !== 1) throw new Error("writePgm needs 1 channel");
  const header = Buffer.from(`P5 ${img.width} ${img.height} 255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.pixels)]);
}
