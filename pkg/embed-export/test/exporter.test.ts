import assert from "node:assert/strict";
import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";

import { hashBackend, resolveBackend } from "../src/backends.js";
import { ExportError, l2Normalize, maxPool, readUniqueStrings, runExport } from "../src/exporter.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const cliPath = path.join(here, "..", "src", "cli.js");

function tmpFile(name: string, content?: string): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "embed-export-"));
  const file = path.join(dir, name);
  if (content !== undefined) fs.writeFileSync(file, content, "utf-8");
  return file;
}

function parseEmbeddingFile(file: string): { dim: number; rows: Map<string, number[]> } {
  const lines = fs.readFileSync(file, "utf-8").trimEnd().split("\n");
  const header = lines[0].split(" ");
  assert.equal(header[0], "#dim");
  const dim = Number(header[1]);
  const rows = new Map<string, number[]>();
  for (const line of lines.slice(1)) {
    const [key, rest] = line.split("\t");
    assert.ok(rest !== undefined, `row without tab: ${line}`);
    const vec = rest.split(" ").map(Number);
    assert.equal(vec.length, dim);
    assert.ok(!rows.has(key), `duplicate key ${key}`);
    rows.set(key, vec);
  }
  return { dim, rows };
}

test("maxPool takes the elementwise maximum over token states", () => {
  assert.deepEqual(maxPool([[1, -5], [0, 7], [-2, 6]]), [1, 7]);
  assert.throws(() => maxPool([]), ExportError);
  assert.throws(() => maxPool([[1, 2], [3]]), ExportError);
});

test("l2Normalize produces unit vectors and keeps zero vectors zero", () => {
  const unit = l2Normalize([3, 4]);
  assert.ok(Math.abs(unit[0] - 0.6) < 1e-12);
  assert.ok(Math.abs(unit[1] - 0.8) < 1e-12);
  assert.deepEqual(l2Normalize([0, 0]), [0, 0]);
});

test("readUniqueStrings dedupes and keeps first-appearance order", () => {
  const file = tmpFile("values.txt", "beta two\nalpha\nbeta two\n\n42\n");
  assert.deepEqual(readUniqueStrings(file), ["beta two", "alpha", "42"]);
});

test("empty input is rejected", () => {
  const file = tmpFile("values.txt", "\n\n");
  assert.throws(() => readUniqueStrings(file), ExportError);
});

test("hash backend is deterministic and respects its dim", async () => {
  const backend = hashBackend(8);
  const a = await backend.tokenStates("alpha beta");
  const b = await backend.tokenStates("alpha beta");
  assert.deepEqual(a, b);
  assert.equal(a.length, 2); // one state per whitespace token
  assert.equal(a[0].length, 8);
  const other = await backend.tokenStates("gamma");
  assert.notDeepEqual(a[0], other[0]);
  for (const row of a) {
    for (const x of row) assert.ok(x >= -1 && x <= 1);
  }
});

test("resolveBackend rejects malformed hash dims", async () => {
  await assert.rejects(resolveBackend("hash:0"), ExportError);
  await assert.rejects(resolveBackend("hash:abc"), ExportError);
});

test("runExport writes one normalized row per unique string", async () => {
  const input = tmpFile("values.txt", "alpha one\nbeta two\nalpha one\n42\n");
  const out = path.join(path.dirname(input), "values.emb");
  const result = await runExport({ input, out, model: "hash:16", batch: 2 }, hashBackend(16));
  assert.equal(result.strings, 3);
  assert.equal(result.dim, 16);

  const { dim, rows } = parseEmbeddingFile(out);
  assert.equal(dim, 16);
  assert.deepEqual([...rows.keys()], ["alpha one", "beta two", "42"]);
  for (const vec of rows.values()) {
    const norm = Math.sqrt(vec.reduce((acc, x) => acc + x * x, 0));
    assert.ok(Math.abs(norm - 1) < 1e-4, `norm ${norm} off unit (6-digit output)`);
  }
});

test("export is deterministic across runs", async () => {
  const input = tmpFile("values.txt", "alpha\nbeta\ngamma delta\n");
  const out1 = path.join(path.dirname(input), "a.emb");
  const out2 = path.join(path.dirname(input), "b.emb");
  await runExport({ input, out: out1, model: "hash:12", batch: 64 }, hashBackend(12));
  await runExport({ input, out: out2, model: "hash:12", batch: 64 }, hashBackend(12));
  assert.deepEqual(fs.readFileSync(out1), fs.readFileSync(out2));
});

test("cli exports through the hash backend", () => {
  const input = tmpFile("values.txt", "alpha one\nbeta two\nalpha one\n");
  const out = path.join(path.dirname(input), "values.emb");
  execFileSync("node", [cliPath, "--input", input, "--out", out, "--model", "hash:16", "--batch", "2"]);
  const { dim, rows } = parseEmbeddingFile(out);
  assert.equal(dim, 16);
  assert.equal(rows.size, 2);
});

test("cli fails with a message on bad arguments and bad input", () => {
  const input = tmpFile("values.txt", "alpha\n");
  const out = path.join(path.dirname(input), "x.emb");
  for (const argv of [
    ["--input", input, "--out", out],                                  // no model
    ["--input", input, "--out", out, "--model", "hash:16", "--batch", "0"],
    ["--input", path.join(path.dirname(input), "missing.txt"),
     "--out", out, "--model", "hash:16"],
  ]) {
    let failed = false;
    try {
      execFileSync("node", [cliPath, ...argv], { stdio: "pipe" });
    } catch (err: any) {
      failed = true;
      assert.ok(err.status !== 0);
      assert.ok(String(err.stderr).length > 0);
    }
    assert.ok(failed, `expected failure for ${argv.join(" ")}`);
  }
});
