/**
 * Usage: node dist/src/cli.js <preset> --in DIR --out DIR
 *
 * Reads the data files the simulator's scenario runner wrote for <preset>
 * and renders the corresponding SVG figure. Output is byte-stable: the same
 * inputs always produce the same file.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { presetNames, renderPreset } from "./figures.js";

function parseArgs(argv: string[]): { preset: string; inDir: string; outDir: string } {
  const positional: string[] = [];
  let inDir = ".";
  let outDir = ".";
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--in") inDir = argv[++i];
    else if (a === "--out") outDir = argv[++i];
    else positional.push(a);
  }
  if (positional.length !== 1) {
    throw new Error(`usage: cli.js <preset> --in DIR --out DIR (presets: ${presetNames().join(", ")})`);
  }
  return { preset: positional[0], inDir, outDir };
}

export function main(argv: string[]): number {
  try {
    const { preset, inDir, outDir } = parseArgs(argv);
    const { name, svg } = renderPreset(preset, inDir);
    mkdirSync(outDir, { recursive: true });
    const path = join(outDir, name);
    writeFileSync(path, svg);
    console.log(path);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 2;
  }
}

process.exitCode = main(process.argv.slice(2));
