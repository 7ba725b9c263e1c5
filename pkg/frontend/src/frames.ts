// Binary frame stream decoding. Each socket message is a 22-byte
// big-endian header followed by raw RGB24 rows:
//   "MCAM" | version u8 | peer ascii u8 | width u16 | height u16
//   | seq u32 | timestamp_us u64

export const FRAME_MAGIC = 'MCAM';
export const FRAME_VERSION = 1;
export const HEADER_LEN = 22;

export interface DecodedFrame {
  peer: string;
  width: number;
  height: number;
  seq: number;
  timestampUs: bigint;
  /** RGBA, ready for ImageData (alpha forced to 255). */
  pixels: Uint8ClampedArray<ArrayBuffer>;
}

export function decodeFrameMessage(data: ArrayBuffer): DecodedFrame {
  if (data.byteLength < HEADER_LEN) {
    throw new Error(`frame message too short: ${data.byteLength} bytes`);
  }
  const view = new DataView(data);
  const magic = String.fromCharCode(
    view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3),
  );
  if (magic !== FRAME_MAGIC) {
    throw new Error(`bad frame magic ${JSON.stringify(magic)}`);
  }
  const version = view.getUint8(4);
  if (version !== FRAME_VERSION) {
    throw new Error(`unsupported frame version ${version}`);
  }
  const peer = String.fromCharCode(view.getUint8(5));
  const width = view.getUint16(6);
  const height = view.getUint16(8);
  const seq = view.getUint32(10);
  const timestampUs = view.getBigUint64(14);

  const body = new Uint8Array(data, HEADER_LEN);
  if (body.length !== width * height * 3) {
    throw new Error(
      `frame body is ${body.length} bytes, expected ${width * height * 3}`,
    );
  }
  const pixels = new Uint8ClampedArray(width * height * 4);
  for (let i = 0, j = 0; i < body.length; i += 3, j += 4) {
    pixels[j] = body[i];
    pixels[j + 1] = body[i + 1];
    pixels[j + 2] = body[i + 2];
    pixels[j + 3] = 255;
  }
  return { peer, width, height, seq, timestampUs, pixels };
}

export interface Pixel {
  r: number;
  g: number;
  b: number;
}

export function pixelAt(frame: DecodedFrame, x: number, y: number): Pixel {
  if (x < 0 || y < 0 || x >= frame.width || y >= frame.height) {
    throw new Error(`pixel (${x},${y}) outside ${frame.width}x${frame.height}`);
  }
  const off = (y * frame.width + x) * 4;
  return { r: frame.pixels[off], g: frame.pixels[off + 1], b: frame.pixels[off + 2] };
}
