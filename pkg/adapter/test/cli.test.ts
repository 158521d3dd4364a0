import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

import { encodeProbPng } from "../src/png.js";

const BIN = path.resolve(
  path.dirname(fileURLToPath(import.meta.url)),
  "../dist/bin.js",
);

function run(...args: string[]) {
  const res = spawnSync(process.execPath, [BIN, ...args], { encoding: "utf-8" });
  return { code: res.status, out: res.stdout, err: res.stderr };
}

let dir: string;

function writeBatch(models = { edges: "stub", normals: "stub" }): string {
  const views = [];
  for (const id of ["left", "right"]) {
    const img = { width: 16, height: 16, values: new Float64Array(256) };
    for (let i = 0; i < 256; i++) img.values[i] = (i % 16) / 15;
    fs.writeFileSync(path.join(dir, `${id}.png`), encodeProbPng(img));
    views.push({
      id,
      center: id === "left" ? [-1, 0, 0] : [1, 0, 0],
      fov_deg: 70,
      resolution: 16,
      roll_deg: 0,
      image: `${id}.png`,
    });
  }
  const file = path.join(dir, "batch.json");
  fs.writeFileSync(
    file,
    JSON.stringify({ format_version: 1, views, models, output_dir: "maps" }),
  );
  return file;
}

beforeAll(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "adapter-cli-"));
});

describe("command line", () => {
  it("prints usage and exits 2 on bad invocations", () => {
    for (const args of [[], ["edges"], ["frobnicate", "--manifest", "x"]]) {
      const res = run(...(args as string[]));
      expect(res.code).toBe(2);
      expect(res.err).toMatch(/^usage: panolayout-adapter/);
    }
  });

  it("reports manifest problems on stderr with exit 1", () => {
    const res = run("all", "--manifest", path.join(dir, "absent.json"), "--stub");
    expect(res.code).toBe(1);
    expect(res.err).toMatch(/^error \[manifest\] /);
  });

  it("reports missing model configuration with exit 1", () => {
    const file = writeBatch({ edges: "hed", normals: "stub" });
    const res = run("all", "--manifest", file);
    expect(res.code).toBe(1);
    expect(res.err).toMatch(/^error \[config\] .*--weights-dir/);
  });

  it("runs a stub batch end to end, repeatably", () => {
    const file = writeBatch();
    const first = run("all", "--manifest", file, "--stub");
    expect(first.err).toBe("");
    expect(first.code).toBe(0);
    expect(first.out).toContain("wrote 4 maps for 2 views");
    const maps = path.join(dir, "maps");
    const names = fs.readdirSync(maps).sort();
    expect(names).toEqual([
      "left_edges.png",
      "left_normals.png",
      "right_edges.png",
      "right_normals.png",
    ]);
    const before = names.map((n) => fs.readFileSync(path.join(maps, n)));
    expect(run("all", "--manifest", file, "--stub").code).toBe(0);
    names.forEach((n, i) => {
      expect(fs.readFileSync(path.join(maps, n)).equals(before[i])).toBe(true);
    });
    expect(fs.readdirSync(maps)).toHaveLength(4); // no stray temp files
  });

  it("limits output to the requested kind", () => {
    const file = writeBatch();
    fs.rmSync(path.join(dir, "maps"), { recursive: true, force: true });
    const res = run("edges", "--manifest", file, "--stub");
    expect(res.code).toBe(0);
    expect(fs.readdirSync(path.join(dir, "maps")).sort()).toEqual([
      "left_edges.png",
      "right_edges.png",
    ]);
  });
});
