import { describe, expect, it } from "vitest";

import { decodeEmbeddings, encodeEmbeddings } from "../src/format.js";

describe("OLE-EMB v1 encoding", () => {
  it("round-trips values, labels, and the normalized flag", () => {
    const values = new Float32Array([1, 0, 0, 0, 1, 0]);
    const buf = encodeEmbeddings({ values, n: 2, d: 3, labels: ["cat", "dog"], normalized: true });
    const back = decodeEmbeddings(buf);
    expect(back.n).toBe(2);
    expect(back.d).toBe(3);
    expect(back.labels).toEqual(["cat", "dog"]);
    expect(back.normalized).toBe(true);
    expect(Array.from(back.values)).toEqual(Array.from(values));
  });

  it("round-trips an empty matrix", () => {
    const buf = encodeEmbeddings({
      values: new Float32Array(0),
      n: 0,
      d: 5,
      labels: [],
      normalized: false,
    });
    const back = decodeEmbeddings(buf);
    expect(back.n).toBe(0);
    expect(back.d).toBe(5);
  });

  it("preserves non-ascii labels byte-exactly", () => {
    const buf = encodeEmbeddings({
      values: new Float32Array([0.25]),
      n: 1,
      d: 1,
      labels: ["café — ümläut"],
      normalized: false,
    });
    expect(decodeEmbeddings(buf).labels[0]).toBe("café — ümläut");
  });

  it("rejects bad magic", () => {
    const buf = encodeEmbeddings({
      values: new Float32Array([1]),
      n: 1,
      d: 1,
      labels: [],
      normalized: false,
    });
    buf.write("NOPE", 0, "ascii");
    expect(() => decodeEmbeddings(buf)).toThrow(/bad magic/);
  });

  it("rejects truncated payloads", () => {
    const buf = encodeEmbeddings({
      values: new Float32Array([1, 2, 3, 4]),
      n: 2,
      d: 2,
      labels: [],
      normalized: false,
    });
    expect(() => decodeEmbeddings(buf.subarray(0, buf.length - 6))).toThrow(/truncated/);
  });

  it("rejects non-finite payload values", () => {
    expect(() =>
      encodeEmbeddings({
        values: new Float32Array([Number.NaN]),
        n: 1,
        d: 1,
        labels: [],
        normalized: false,
      })
    ).toThrow(/non-finite/);
  });

  it("rejects label-count mismatches", () => {
    expect(() =>
      encodeEmbeddings({
        values: new Float32Array([1, 2]),
        n: 2,
        d: 1,
        labels: ["only-one"],
        normalized: false,
      })
    ).toThrow(/label count/);
  });
});
