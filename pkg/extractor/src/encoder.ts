/**
 * Embedding model backends behind a model-identifier string.
 *
 * The only built-in backend is the deterministic feature-hashing
 * encoder, selected with ids like "hash:512". It needs no weights or
 * network access: text is folded into character trigram counts and
 * images into sampled byte pairs, each hashed into a signed bucket of
 * the output dimension and L2-normalized. Identical inputs produce
 * identical vectors on every platform, which is what the conformance
 * tests exercise. Real encoder backends can register alongside it.
 */

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

function fnv1a64(bytes: Uint8Array, seed: bigint = FNV_OFFSET): bigint {
  let h = seed;
  for (const b of bytes) {
    h ^= BigInt(b);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

export interface Encoder {
  readonly dimension: number;
  encodeText(text: string): Float32Array;
  encodeImage(bytes: Uint8Array): Float32Array;
  /** whether the model has a "no" text branch (CLIPN-style checkpoints) */
  readonly hasNoBranch: boolean;
}

function accumulate(target: Float64Array, token: Uint8Array) {
  const h = fnv1a64(token);
  const index = Number(h % BigInt(target.length));
  const sign = ((h >> 62n) & 1n) === 1n ? 1 : -1;
  target[index] += sign;
}

function normalized(accumulator: Float64Array): Float32Array {
  let norm = Math.hypot(...accumulator);
  if (norm === 0) {
    accumulator[0] = 1;
    norm = 1;
  }
  const out = new Float32Array(accumulator.length);
  for (let i = 0; i < accumulator.length; i++) out[i] = accumulator[i] / norm;
  // float32 rounding can nudge the norm; renormalize once in float32
  let n32 = 0;
  for (const v of out) n32 += v * v;
  n32 = Math.sqrt(n32);
  for (let i = 0; i < out.length; i++) out[i] /= n32;
  return out;
}

class HashEncoder implements Encoder {
  readonly hasNoBranch = true;

  constructor(readonly dimension: number) {
    if (!Number.isInteger(dimension) || dimension < 8) {
      throw new Error(`hash encoder dimension must be an integer >= 8, got ${dimension}`);
    }
  }

  encodeText(text: string): Float32Array {
    const acc = new Float64Array(this.dimension);
    const padded = `${text.toLowerCase()}`;
    const bytes = Buffer.from(padded, "utf-8");
    for (let i = 0; i + 3 <= bytes.length; i++) {
      accumulate(acc, bytes.subarray(i, i + 3));
    }
    if (bytes.length < 3) accumulate(acc, bytes);
    return normalized(acc);
  }

  encodeImage(bytes: Uint8Array): Float32Array {
    const acc = new Float64Array(this.dimension);
    // sample byte pairs with a stride bounding the work on large files
    const stride = Math.max(1, Math.floor(bytes.length / 4096));
    for (let i = 0; i + 2 <= bytes.length; i += stride) {
      accumulate(acc, bytes.subarray(i, i + 2));
    }
    if (bytes.length < 2) accumulate(acc, bytes);
    return normalized(acc);
  }
}

export function loadEncoder(model: string): Encoder {
  const [scheme, rest] = model.split(":", 2);
  if (scheme === "hash") {
    const dimension = Number(rest);
    if (!Number.isFinite(dimension)) {
      throw new Error(`cannot load model ${model}: expected hash:<dimension>`);
    }
    return new HashEncoder(dimension);
  }
  throw new Error(`cannot load model ${model}: unknown backend ${scheme!}`);
}
