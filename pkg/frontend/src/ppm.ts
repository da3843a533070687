/** Tiny binary PPM (P6, maxval 255) decoder for service frame payloads. */

export interface PpmImage {
  width: number;
  height: number;
  /** RGBA, ready for ImageData */
  pixels: Uint8ClampedArray;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

export function decodePpm(bytes: Uint8Array): PpmImage {
  if (bytes[0] !== 0x50 || bytes[1] !== 0x36) {
    throw new Error("not a binary P6 stream");
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      // comment line
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let value = 0;
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) {
      value = value * 10 + (bytes[pos] - 0x30);
      pos++;
    }
    if (pos === start) throw new Error("truncated PPM header");
    fields.push(value);
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  const expected = width * height * 3;
  if (bytes.length - pos < expected) {
    throw new Error("truncated PPM payload");
  }
  const pixels = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    pixels[i * 4] = bytes[pos + i * 3];
    pixels[i * 4 + 1] = bytes[pos + i * 3 + 1];
    pixels[i * 4 + 2] = bytes[pos + i * 3 + 2];
    pixels[i * 4 + 3] = 255;
  }
  return { width, height, pixels };
}
