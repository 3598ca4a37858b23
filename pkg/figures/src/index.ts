/**
 * Render bundled figures from experiment CSVs.
 *
 * Usage: node dist/index.js [fig3 fig7 ...] [--data DIR] [--out DIR]
 * With no figure names, renders all of them.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { ALL_FIGURES } from "./figures.js";
import { renderRecipe } from "./recipes.js";

export function renderAll(names: string[], dataDir: string, outDir: string): string[] {
  const registry = new Map(ALL_FIGURES.map((f) => [f.name, f]));
  const targets = names.length > 0 ? names : [...registry.keys()];
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  for (const name of targets) {
    const recipe = registry.get(name);
    if (!recipe) {
      throw new Error(`unknown figure ${name}; available: ${[...registry.keys()].join(", ")}`);
    }
    const svg = renderRecipe(recipe, dataDir);
    const path = join(outDir, `${name}.svg`);
    writeFileSync(path, svg, "utf-8");
    written.push(path);
  }
  return written;
}

function parseArgs(argv: string[]): { names: string[]; dataDir: string; outDir: string } {
  const names: string[] = [];
  let dataDir = "data";
  let outDir = "out";
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--data") dataDir = argv[++i];
    else if (arg === "--out") outDir = argv[++i];
    else if (arg.startsWith("--")) throw new Error(`unknown flag ${arg}`);
    else names.push(arg);
  }
  return { names, dataDir, outDir };
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  try {
    const { names, dataDir, outDir } = parseArgs(process.argv.slice(2));
    for (const path of renderAll(names, dataDir, outDir)) {
      console.log(`wrote ${path}`);
    }
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
  }
}
