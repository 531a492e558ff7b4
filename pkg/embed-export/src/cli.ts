#!/usr/bin/env node
/**
 * embed-export --input values.txt --out values.emb --model <id> --batch 64
 *
 * Reads unique strings (one per line), embeds each with the frozen model by
 * max-pooling its final-layer token states, and writes the embedding file
 * format that the alignment toolkit loads.
 */

import { resolveBackend } from "./backends.js";
import { ExportError, runExport } from "./exporter.js";

interface Args {
  input: string;
  out: string;
  model: string;
  batch: number;
}

const USAGE = "usage: embed-export --input values.txt --out values.emb --model <id> [--batch 64]";

function parseArgs(argv: string[]): Args {
  const values: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new ExportError(USAGE);
    }
    values[flag.slice(2)] = value;
  }
  for (const required of ["input", "out", "model"]) {
    if (!(required in values)) {
      throw new ExportError(`missing --${required}\n${USAGE}`);
    }
  }
  const batch = values.batch === undefined ? 64 : Number(values.batch);
  if (!Number.isInteger(batch) || batch < 1) {
    throw new ExportError(`--batch must be a positive integer, got ${values.batch}`);
  }
  return { input: values.input, out: values.out, model: values.model, batch };
}

export async function main(argv: string[]): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const backend = await resolveBackend(args.model);
    const { strings, dim } = await runExport(args, backend, (msg) => console.error(msg));
    console.error(`wrote ${strings} vectors of dim ${dim} to ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof ExportError || err instanceof Error) {
      console.error(`embed-export: ${(err as Error).message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url === (await import("node:url")).pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
