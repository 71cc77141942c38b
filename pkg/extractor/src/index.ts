export { decodeEmbeddings, encodeEmbeddings, FLAG_NORMALIZED, MAGIC, VERSION } from "./format.js";
export type { EmbeddingFile } from "./format.js";
export { loadEncoder } from "./encoder.js";
export type { Encoder } from "./encoder.js";
export {
  applyTemplate,
  DEFAULT_NO_TEMPLATE,
  DEFAULT_TEMPLATE,
  extractImages,
  extractNoProbabilities,
  extractText,
  readLabelList,
  writeEmbeddingFile,
  writeSidecarLog,
} from "./extract.js";
export type { ExtractionJob, ImageExtraction, NoProbsJob } from "./extract.js";
