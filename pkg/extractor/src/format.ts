/**
 * OLE-EMB v1: the binary embedding interchange format.
 *
 * Layout (little-endian):
 *   magic   4 bytes  ASCII "OLEE"
 *   version u16      1
 *   flags   u16      bit 0 = rows are unit-normalized
 *   n       u32      row count
 *   d       u32      column count
 *   payload n*d      float32, row-major
 *   labels  u32      label count (0 or n), then per label
 *                    u32 byte length + UTF-8 bytes
 */

export const MAGIC = "OLEE";
export const VERSION = 1;
export const FLAG_NORMALIZED = 0x1;

export interface EmbeddingFile {
  /** row-major n*d values */
  values: Float32Array;
  n: number;
  d: number;
  labels: string[];
  normalized: boolean;
}

export function encodeEmbeddings(file: EmbeddingFile): Buffer {
  const { values, n, d, labels, normalized } = file;
  if (values.length !== n * d) {
    throw new Error(`payload has ${values.length} values, expected ${n}x${d}`);
  }
  if (labels.length !== 0 && labels.length !== n) {
    throw new Error(`label count ${labels.length} must be 0 or ${n}`);
  }
  for (const v of values) {
    if (!Number.isFinite(v)) throw new Error("payload contains non-finite values");
  }
  const encodedLabels = labels.map((label) => Buffer.from(label, "utf-8"));
  const labelBytes = encodedLabels.reduce((acc, b) => acc + 4 + b.length, 0);
  const out = Buffer.alloc(16 + 4 * n * d + 4 + labelBytes);
  let off = 0;
  out.write(MAGIC, off, "ascii");
  off += 4;
  off = out.writeUInt16LE(VERSION, off);
  off = out.writeUInt16LE(normalized ? FLAG_NORMALIZED : 0, off);
  off = out.writeUInt32LE(n, off);
  off = out.writeUInt32LE(d, off);
  for (let i = 0; i < values.length; i++) {
    off = out.writeFloatLE(values[i], off);
  }
  off = out.writeUInt32LE(encodedLabels.length, off);
  for (const raw of encodedLabels) {
    off = out.writeUInt32LE(raw.length, off);
    off += raw.copy(out, off);
  }
  return out;
}

export function decodeEmbeddings(buf: Buffer): EmbeddingFile {
  const need = (count: number, off: number) => {
    if (off + count > buf.length) {
      throw new Error(`file truncated: needed ${count} bytes at offset ${off}`);
    }
  };
  need(16, 0);
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`bad magic at offset 0, expected ${MAGIC}`);
  }
  const version = buf.readUInt16LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const flags = buf.readUInt16LE(6);
  const n = buf.readUInt32LE(8);
  const d = buf.readUInt32LE(12);
  let off = 16;
  need(4 * n * d, off);
  const values = new Float32Array(n * d);
  for (let i = 0; i < n * d; i++) {
    values[i] = buf.readFloatLE(off);
    off += 4;
  }
  need(4, off);
  const labelCount = buf.readUInt32LE(off);
  off += 4;
  if (labelCount !== 0 && labelCount !== n) {
    throw new Error(`label count ${labelCount} must be 0 or ${n}`);
  }
  const labels: string[] = [];
  for (let i = 0; i < labelCount; i++) {
    need(4, off);
    const length = buf.readUInt32LE(off);
    off += 4;
    need(length, off);
    labels.push(buf.toString("utf-8", off, off + length));
    off += length;
  }
  if (off !== buf.length) {
    throw new Error(`${buf.length - off} trailing bytes after label block`);
  }
  return { values, n, d, labels, normalized: (flags & FLAG_NORMALIZED) !== 0 };
}
