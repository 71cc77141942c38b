/**
 * Extraction jobs: label lists and image folders in, OLE-EMB v1 out.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Encoder, loadEncoder } from "./encoder.js";
import { EmbeddingFile, encodeEmbeddings } from "./format.js";

export interface ExtractionJob {
  model: string;
  input: string;
  template?: string;
  batchSize?: number;
  out: string;
}

export const DEFAULT_TEMPLATE = "a photo of a {label}";
export const DEFAULT_NO_TEMPLATE = "a photo with no {label}";
const PLACEHOLDER = "{label}";

export function applyTemplate(template: string, label: string): string {
  const occurrences = template.split(PLACEHOLDER).length - 1;
  if (occurrences !== 1) {
    throw new Error(`template must contain exactly one ${PLACEHOLDER} placeholder`);
  }
  return template.replace(PLACEHOLDER, label);
}

export function readLabelList(file: string): string[] {
  const labels = fs
    .readFileSync(file, "utf-8")
    .split(/\r?\n/)
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  if (labels.length === 0) throw new Error(`label list ${file} is empty`);
  return labels;
}

function matrixFile(rows: Float32Array[], d: number, labels: string[], normalized: boolean): EmbeddingFile {
  const values = new Float32Array(rows.length * d);
  rows.forEach((row, i) => values.set(row, i * d));
  return { values, n: rows.length, d, labels, normalized };
}

/** One unit-normalized row per label, order preserved, duplicates kept. */
export function extractText(job: ExtractionJob): EmbeddingFile {
  const encoder = loadEncoder(job.model);
  const template = job.template ?? DEFAULT_TEMPLATE;
  const labels = readLabelList(job.input);
  const rows = labels.map((label) => encoder.encodeText(applyTemplate(template, label)));
  return matrixFile(rows, encoder.dimension, labels, true);
}

const IMAGE_MAGICS: Array<{ ext: string; check: (b: Buffer) => boolean }> = [
  { ext: "png", check: (b) => b.length > 8 && b.readUInt32BE(0) === 0x89504e47 },
  { ext: "jpeg", check: (b) => b.length > 3 && b[0] === 0xff && b[1] === 0xd8 && b[2] === 0xff },
  { ext: "gif", check: (b) => b.length > 6 && b.toString("ascii", 0, 3) === "GIF" },
  { ext: "bmp", check: (b) => b.length > 2 && b.toString("ascii", 0, 2) === "BM" },
  {
    ext: "webp",
    check: (b) =>
      b.length > 12 && b.toString("ascii", 0, 4) === "RIFF" && b.toString("ascii", 8, 12) === "WEBP",
  },
];

export function looksDecodable(bytes: Buffer): boolean {
  return IMAGE_MAGICS.some(({ check }) => check(bytes));
}

function* walkFiles(root: string): Generator<string> {
  for (const entry of fs.readdirSync(root, { withFileTypes: true })) {
    const full = path.join(root, entry.name);
    if (entry.isDirectory()) {
      yield* walkFiles(full);
    } else if (entry.isFile()) {
      yield full;
    }
  }
}

export interface ImageExtraction {
  file: EmbeddingFile;
  /** relative paths of files skipped as undecodable */
  skipped: string[];
}

/**
 * One row per decodable image, label = path relative to the input
 * directory, rows in sorted path order. Undecodable files are skipped
 * and recorded for the sidecar log.
 */
export function extractImages(job: ExtractionJob): ImageExtraction {
  const encoder = loadEncoder(job.model);
  const root = job.input;
  if (!fs.existsSync(root) || !fs.statSync(root).isDirectory()) {
    throw new Error(`image input ${root} is not a directory`);
  }
  const files = Array.from(walkFiles(root))
    .map((full) => path.relative(root, full))
    .sort();
  const rows: Float32Array[] = [];
  const labels: string[] = [];
  const skipped: string[] = [];
  for (const rel of files) {
    const bytes = fs.readFileSync(path.join(root, rel));
    if (!looksDecodable(bytes)) {
      skipped.push(rel);
      continue;
    }
    rows.push(encoder.encodeImage(bytes));
    labels.push(rel);
  }
  return { file: matrixFile(rows, encoder.dimension, labels, true), skipped };
}

function dot(a: Float32Array, b: Float32Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

export interface NoProbsJob extends ExtractionJob {
  idLabels: string;
  noTemplate?: string;
  temperature?: number;
}

/**
 * Per-image probability that the image does NOT show each ID class:
 * a paired two-way softmax between the "yes" and "no" prompt
 * embeddings. Emitted as an n x M matrix with the normalized flag
 * unset.
 */
export function extractNoProbabilities(job: NoProbsJob): ImageExtraction {
  const encoder = loadEncoder(job.model);
  if (!encoder.hasNoBranch) {
    throw new Error(`model ${job.model} does not expose a "no" text branch`);
  }
  const temperature = job.temperature ?? 0.07;
  const yesTemplate = job.template ?? DEFAULT_TEMPLATE;
  const noTemplate = job.noTemplate ?? DEFAULT_NO_TEMPLATE;
  const idLabels = readLabelList(job.idLabels);
  const yes = idLabels.map((l) => encoder.encodeText(applyTemplate(yesTemplate, l)));
  const no = idLabels.map((l) => encoder.encodeText(applyTemplate(noTemplate, l)));

  const images = extractImages({ ...job, template: undefined });
  const { n, d } = images.file;
  const m = idLabels.length;
  const values = new Float32Array(n * m);
  for (let i = 0; i < n; i++) {
    const x = images.file.values.subarray(i * d, (i + 1) * d);
    for (let j = 0; j < m; j++) {
      const logit = (dot(x, no[j]) - dot(x, yes[j])) / temperature;
      values[i * m + j] = 1 / (1 + Math.exp(-logit));
    }
  }
  return {
    file: { values, n, d: m, labels: images.file.labels, normalized: false },
    skipped: images.skipped,
  };
}

export function writeEmbeddingFile(file: EmbeddingFile, out: string): void {
  fs.mkdirSync(path.dirname(path.resolve(out)), { recursive: true });
  fs.writeFileSync(out, encodeEmbeddings(file));
}

export function writeSidecarLog(out: string, skipped: string[]): string | null {
  if (skipped.length === 0) return null;
  const logPath = `${out}.skipped.log`;
  fs.writeFileSync(logPath, skipped.map((rel) => `skipped undecodable: ${rel}`).join("\n") + "\n");
  return logPath;
}
