/**
 * ZTH1 weight container: magic "ZTH1", u32 LE entry count; per entry a u16
 * LE name length, UTF-8 name, u8 rank, rank x u32 LE dims, f32 LE payload.
 */

export interface ZthEntry {
  name: string;
  shape: number[];
  data: Float32Array;
}

export function encodeZth(entries: ZthEntry[]): Uint8Array {
  const encoder = new TextEncoder();
  let size = 8;
  const names = entries.map((e) => encoder.encode(e.name));
  for (let i = 0; i < entries.length; i++) {
    size += 2 + names[i].length + 1 + 4 * entries[i].shape.length + 4 * entries[i].data.length;
  }
  const buf = new Uint8Array(size);
  const view = new DataView(buf.buffer);
  buf.set([0x5a, 0x54, 0x48, 0x31], 0); // "ZTH1"
  view.setUint32(4, entries.length, true);
  let off = 8;
  for (let i = 0; i < entries.length; i++) {
    const e = entries[i];
    view.setUint16(off, names[i].length, true);
    off += 2;
    buf.set(names[i], off);
    off += names[i].length;
    view.setUint8(off, e.shape.length);
    off += 1;
    for (const d of e.shape) {
      view.setUint32(off, d, true);
      off += 4;
    }
    for (let j = 0; j < e.data.length; j++) {
      view.setFloat32(off, e.data[j], true);
      off += 4;
    }
  }
  return buf;
}

export function decodeZth(buf: Uint8Array): ZthEntry[] {
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const magic = String.fromCharCode(buf[0], buf[1], buf[2], buf[3]);
  if (magic !== "ZTH1") throw new Error(`bad magic: ${magic}`);
  const count = view.getUint32(4, true);
  const decoder = new TextDecoder();
  const entries: ZthEntry[] = [];
  const seen = new Set<string>();
  let off = 8;
  for (let i = 0; i < count; i++) {
    const nameLen = view.getUint16(off, true);
    off += 2;
    const name = decoder.decode(buf.subarray(off, off + nameLen));
    off += nameLen;
    if (seen.has(name)) throw new Error(`duplicate entry name ${name}`);
    seen.add(name);
    const rank = view.getUint8(off);
    off += 1;
    const shape: number[] = [];
    let n = 1;
    for (let r = 0; r < rank; r++) {
      const d = view.getUint32(off, true);
      off += 4;
      shape.push(d);
      n *= d;
    }
    if (off + 4 * n > buf.byteLength) throw new Error(`truncated payload for ${name}`);
    const data = new Float32Array(n);
    for (let j = 0; j < n; j++) {
      data[j] = view.getFloat32(off, true);
      off += 4;
    }
    entries.push({ name, shape, data });
  }
  return entries;
}
