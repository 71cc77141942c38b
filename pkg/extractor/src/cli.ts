#!/usr/bin/env node
/**
 * ole-extract: produce OLE-EMB v1 files without touching the pipeline.
 *
 *   ole-extract text     --model hash:512 --input labels.txt --out text.oleemb
 *                        [--template "a photo of a {label}"]
 *   ole-extract images   --model hash:512 --input ./photos --out images.oleemb
 *   ole-extract no-probs --model hash:512 --input ./photos --id-labels id.txt
 *                        --out noprobs.oleemb [--no-template STR] [--temperature T]
 */

import { parseArgs } from "node:util";

import {
  extractImages,
  extractNoProbabilities,
  extractText,
  writeEmbeddingFile,
  writeSidecarLog,
} from "./extract.js";

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error(
    "usage: ole-extract text|images|no-probs --model <id> --input <path> --out <file>\n" +
      "       [--template <str>] [--id-labels <file>] [--no-template <str>]\n" +
      "       [--temperature <t>] [--batch-size <n>]"
  );
  process.exit(2);
}

function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (!command || !["text", "images", "no-probs"].includes(command)) {
    usage(`unknown command ${command ?? "(none)"}`);
  }
  let values;
  try {
    ({ values } = parseArgs({
      args: rest,
      options: {
        model: { type: "string" },
        input: { type: "string" },
        out: { type: "string" },
        template: { type: "string" },
        "id-labels": { type: "string" },
        "no-template": { type: "string" },
        temperature: { type: "string" },
        "batch-size": { type: "string" },
      },
    }));
  } catch (err) {
    usage((err as Error).message);
  }
  for (const required of ["model", "input", "out"] as const) {
    if (!values[required]) usage(`--${required} is required`);
  }
  const job = {
    model: values.model!,
    input: values.input!,
    out: values.out!,
    template: values.template,
    batchSize: values["batch-size"] ? Number(values["batch-size"]) : undefined,
  };

  try {
    if (command === "text") {
      const file = extractText(job);
      writeEmbeddingFile(file, job.out);
      console.log(`wrote ${job.out}: ${file.n} rows x ${file.d} dims`);
    } else if (command === "images") {
      const { file, skipped } = extractImages(job);
      writeEmbeddingFile(file, job.out);
      const log = writeSidecarLog(job.out, skipped);
      for (const rel of skipped) console.warn(`warning: skipped undecodable ${rel}`);
      console.log(
        `wrote ${job.out}: ${file.n} rows x ${file.d} dims` +
          (log ? ` (${skipped.length} skipped, see ${log})` : "")
      );
    } else {
      if (!values["id-labels"]) usage("--id-labels is required for no-probs");
      const { file, skipped } = extractNoProbabilities({
        ...job,
        idLabels: values["id-labels"]!,
        noTemplate: values["no-template"],
        temperature: values.temperature ? Number(values.temperature) : undefined,
      });
      writeEmbeddingFile(file, job.out);
      const log = writeSidecarLog(job.out, skipped);
      console.log(
        `wrote ${job.out}: ${file.n} images x ${file.d} classes` +
          (log ? ` (${skipped.length} skipped, see ${log})` : "")
      );
    }
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

process.exit(main(process.argv.slice(2)));
