import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { loadEncoder } from "../src/encoder.js";
import {
  applyTemplate,
  extractImages,
  extractNoProbabilities,
  extractText,
} from "../src/extract.js";

let workDir: string;

beforeAll(() => {
  workDir = fs.mkdtempSync(path.join(os.tmpdir(), "ole-extract-"));
});

afterAll(() => {
  fs.rmSync(workDir, { recursive: true, force: true });
});

function writeLabels(name: string, labels: string[]): string {
  const file = path.join(workDir, name);
  fs.writeFileSync(file, labels.join("\n") + "\n");
  return file;
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function writePng(rel: string, payload: number[]): void {
  const full = path.join(workDir, rel);
  fs.mkdirSync(path.dirname(full), { recursive: true });
  fs.writeFileSync(full, Buffer.concat([PNG_MAGIC, Buffer.from(payload)]));
}

function rowNorm(values: Float32Array, d: number, i: number): number {
  let s = 0;
  for (let j = 0; j < d; j++) s += values[i * d + j] ** 2;
  return Math.sqrt(s);
}

describe("model loading", () => {
  it("loads hash backends with a dimension", () => {
    expect(loadEncoder("hash:64").dimension).toBe(64);
  });

  it("fails on unknown model identifiers", () => {
    expect(() => loadEncoder("clip-vit-b16")).toThrow(/cannot load model/);
    expect(() => loadEncoder("hash:abc")).toThrow(/cannot load model/);
  });
});

describe("templates", () => {
  it("substitutes the single placeholder", () => {
    expect(applyTemplate("a photo of a {label}", "dog")).toBe("a photo of a dog");
  });

  it("rejects templates without exactly one placeholder", () => {
    expect(() => applyTemplate("no placeholder", "x")).toThrow(/exactly one/);
    expect(() => applyTemplate("{label} and {label}", "x")).toThrow(/exactly one/);
  });
});

describe("extractText", () => {
  it("emits one unit row per label, order preserved", () => {
    const input = writeLabels("labels.txt", ["cat", "dog", "axolotl"]);
    const file = extractText({ model: "hash:64", input, out: "unused" });
    expect(file.n).toBe(3);
    expect(file.d).toBe(64);
    expect(file.normalized).toBe(true);
    expect(file.labels).toEqual(["cat", "dog", "axolotl"]);
    for (let i = 0; i < file.n; i++) {
      expect(Math.abs(rowNorm(file.values, 64, i) - 1)).toBeLessThan(1e-5);
    }
  });

  it("keeps duplicate labels as duplicate rows", () => {
    const input = writeLabels("dupes.txt", ["same", "same"]);
    const file = extractText({ model: "hash:32", input, out: "unused" });
    expect(file.n).toBe(2);
    expect(Array.from(file.values.subarray(0, 32))).toEqual(
      Array.from(file.values.subarray(32, 64))
    );
  });

  it("is permutation-equivariant", () => {
    const labels = ["ant", "bee", "cow", "dog", "elk"];
    const forward = extractText({
      model: "hash:48",
      input: writeLabels("fwd.txt", labels),
      out: "unused",
    });
    const reversed = extractText({
      model: "hash:48",
      input: writeLabels("rev.txt", [...labels].reverse()),
      out: "unused",
    });
    for (let i = 0; i < labels.length; i++) {
      const j = labels.length - 1 - i;
      expect(Array.from(forward.values.subarray(i * 48, (i + 1) * 48))).toEqual(
        Array.from(reversed.values.subarray(j * 48, (j + 1) * 48))
      );
    }
  });

  it("is deterministic across runs", () => {
    const input = writeLabels("det.txt", ["alpha", "beta"]);
    const a = extractText({ model: "hash:64", input, out: "unused" });
    const b = extractText({ model: "hash:64", input, out: "unused" });
    expect(Array.from(a.values)).toEqual(Array.from(b.values));
  });

  it("rejects an empty label list", () => {
    const input = path.join(workDir, "empty.txt");
    fs.writeFileSync(input, "\n\n");
    expect(() => extractText({ model: "hash:64", input, out: "unused" })).toThrow(/empty/);
  });
});

describe("extractImages", () => {
  it("walks the directory in sorted order with relative-path labels", () => {
    writePng("imgs/b.png", [1, 2, 3]);
    writePng("imgs/a.png", [4, 5, 6]);
    writePng("imgs/sub/c.png", [7, 8, 9]);
    const { file, skipped } = extractImages({
      model: "hash:32",
      input: path.join(workDir, "imgs"),
      out: "unused",
    });
    expect(skipped).toEqual([]);
    expect(file.labels).toEqual(["a.png", "b.png", path.join("sub", "c.png")]);
    expect(file.normalized).toBe(true);
  });

  it("skips undecodable files and reports them", () => {
    writePng("mixed/ok.png", [1, 2, 3, 4]);
    fs.writeFileSync(path.join(workDir, "mixed", "broken.txt"), "not an image");
    const { file, skipped } = extractImages({
      model: "hash:32",
      input: path.join(workDir, "mixed"),
      out: "unused",
    });
    expect(file.n).toBe(1);
    expect(skipped).toEqual(["broken.txt"]);
  });

  it("handles an empty directory", () => {
    fs.mkdirSync(path.join(workDir, "none"));
    const { file } = extractImages({
      model: "hash:16",
      input: path.join(workDir, "none"),
      out: "unused",
    });
    expect(file.n).toBe(0);
    expect(file.d).toBe(16);
  });
});

describe("extractNoProbabilities", () => {
  it("emits an n x M matrix of probabilities with the flag unset", () => {
    writePng("np/x.png", [9, 9, 9]);
    writePng("np/y.png", [1, 1, 1, 1]);
    const idLabels = writeLabels("id.txt", ["cat", "dog", "fox"]);
    const { file } = extractNoProbabilities({
      model: "hash:64",
      input: path.join(workDir, "np"),
      idLabels,
      out: "unused",
    });
    expect(file.n).toBe(2);
    expect(file.d).toBe(3);
    expect(file.normalized).toBe(false);
    for (const v of file.values) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(1);
    }
  });
});
