/**
 * Core export logic: read unique strings, obtain per-token hidden states from
 * a backend, max-pool them into one vector per string, and write the
 * embedding file format (`#dim <D>` header, then `key<TAB>f1 f2 ... fD`).
 */

import * as fs from "node:fs";

/** Produces final-layer token states for one string: [tokens][hidden]. */
export interface EmbeddingBackend {
  readonly name: string;
  tokenStates(text: string): Promise<number[][]>;
}

export interface ExportJob {
  input: string;
  out: string;
  model: string;
  batch: number;
}

export class ExportError extends Error {}

/** Elementwise max over token states; the fixed-length vector per string. */
export function maxPool(states: number[][]): number[] {
  if (states.length === 0 || states[0].length === 0) {
    throw new ExportError("cannot pool an empty token-state sequence");
  }
  const dim = states[0].length;
  const out = new Array<number>(dim).fill(-Infinity);
  for (const row of states) {
    if (row.length !== dim) {
      throw new ExportError(`ragged token states: ${row.length} vs ${dim}`);
    }
    for (let j = 0; j < dim; j++) {
      if (row[j] > out[j]) out[j] = row[j];
    }
  }
  return out;
}

export function l2Normalize(vec: number[]): number[] {
  const norm = Math.sqrt(vec.reduce((acc, x) => acc + x * x, 0));
  return norm > 0 ? vec.map((x) => x / norm) : vec.slice();
}

/** Input lines, deduplicated, first-appearance order kept. */
export function readUniqueStrings(path: string): string[] {
  const raw = fs.readFileSync(path, "utf-8");
  const seen = new Set<string>();
  const unique: string[] = [];
  for (const line of raw.split("\n")) {
    const text = line.replace(/\r$/, "");
    if (text.length === 0) continue;
    if (!seen.has(text)) {
      seen.add(text);
      unique.push(text);
    }
  }
  if (unique.length === 0) {
    throw new ExportError(`input file ${path} holds no strings`);
  }
  return unique;
}

/** Six significant digits: compact files, well above load-time tolerances. */
function formatFloat(x: number): string {
  return x.toPrecision(6);
}

export function writeEmbeddings(path: string, rows: Map<string, number[]>, dim: number): void {
  const lines: string[] = [`#dim ${dim}`];
  for (const [key, vec] of rows) {
    if (vec.length !== dim) {
      throw new ExportError(`vector for ${JSON.stringify(key)} has length ${vec.length}, expected ${dim}`);
    }
    if (/[\t\n]/.test(key)) {
      throw new ExportError(`key ${JSON.stringify(key)} contains a tab or newline`);
    }
    lines.push(`${key}\t${vec.map(formatFloat).join(" ")}`);
  }
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

/**
 * Run one export: dedupe input, embed every string (max-pooled, unit norm),
 * write the table. `batch` only sizes the progress chunks; strings are
 * embedded one at a time so padding can never leak into the pooling.
 */
export async function runExport(
  job: ExportJob,
  backend: EmbeddingBackend,
  log: (message: string) => void = () => {},
): Promise<{ strings: number; dim: number }> {
  if (job.batch < 1) {
    throw new ExportError(`batch must be >= 1, got ${job.batch}`);
  }
  const strings = readUniqueStrings(job.input);
  const rows = new Map<string, number[]>();
  let dim = -1;
  for (let start = 0; start < strings.length; start += job.batch) {
    const chunk = strings.slice(start, start + job.batch);
    for (const text of chunk) {
      const states = await backend.tokenStates(text);
      const pooled = l2Normalize(maxPool(states));
      if (dim === -1) {
        dim = pooled.length;
      } else if (pooled.length !== dim) {
        throw new ExportError(`backend changed dim from ${dim} to ${pooled.length}`);
      }
      rows.set(text, pooled);
    }
    log(`embedded ${Math.min(start + job.batch, strings.length)}/${strings.length}`);
  }
  writeEmbeddings(job.out, rows, dim);
  return { strings: strings.length, dim };
}
