import { mkdtempSync, readFileSync, writeFileSync, mkdirSync, cpSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { MissingColumnError, parseLabel, readCsv } from "../src/csv.js";
import { ALL_FIGURES } from "../src/figures.js";
import { renderRecipe } from "../src/recipes.js";
import { renderAll } from "../src/index.js";
import { linearScale, logScale } from "../src/svg.js";

const DATA_DIR = join(__dirname, "..", "data");

describe("csv reader", () => {
  it("parses headers and rows", () => {
    const dir = mkdtempSync(join(tmpdir(), "csv-"));
    const path = join(dir, "t.csv");
    writeFileSync(path, "a,b\n1,2\n3,4\n");
    const table = readCsv(path, ["a", "b"]);
    expect(table.rows).toHaveLength(2);
    expect(table.rows[1].b).toBe("4");
  });

  it("names the missing column", () => {
    const dir = mkdtempSync(join(tmpdir(), "csv-"));
    const path = join(dir, "t.csv");
    writeFileSync(path, "a,b\n1,2\n");
    expect(() => readCsv(path, ["a", "c"])).toThrowError(/missing column "c" in t\.csv/);
  });

  it("rejects ragged rows", () => {
    const dir = mkdtempSync(join(tmpdir(), "csv-"));
    const path = join(dir, "t.csv");
    writeFileSync(path, "a,b\n1\n");
    expect(() => readCsv(path, ["a"])).toThrowError(/ragged row/);
  });

  it("parses grid labels", () => {
    expect(parseLabel("ratio=2|alpha=3|tau_ms=1")).toEqual({
      ratio: "2",
      alpha: "3",
      tau_ms: "1",
    });
  });
});

describe("scales", () => {
  it("linear scale maps domain to range", () => {
    const s = linearScale([0, 10], [100, 200]);
    expect(s(0)).toBe(100);
    expect(s(10)).toBe(200);
    expect(s.ticks.length).toBeGreaterThan(2);
  });

  it("log scale is monotone", () => {
    const s = logScale([1, 100], [0, 300]);
    expect(s(1)).toBe(0);
    expect(s(10)).toBeCloseTo(150);
    expect(s(100)).toBeCloseTo(300);
  });
});

describe("bundled figures", () => {
  for (const recipe of ALL_FIGURES) {
    it(`renders ${recipe.name} from shipped CSVs`, () => {
      const svg = renderRecipe(recipe, DATA_DIR);
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.endsWith("</svg>")).toBe(true);
      expect(svg).toContain("<path");
      expect(svg.length).toBeGreaterThan(2000);
    });
  }

  it("rendering is deterministic", () => {
    const a = renderRecipe(ALL_FIGURES[0], DATA_DIR);
    const b = renderRecipe(ALL_FIGURES[0], DATA_DIR);
    expect(a).toBe(b);
  });

  it("renderAll writes one SVG per figure", () => {
    const out = mkdtempSync(join(tmpdir(), "figs-"));
    const written = renderAll([], DATA_DIR, out);
    expect(written).toHaveLength(ALL_FIGURES.length);
    for (const path of written) {
      expect(readFileSync(path, "utf-8")).toContain("</svg>");
    }
  });

  it("fails with a named-column error on a truncated CSV", () => {
    // copy the data dir, then drop the `se` column from fig3's table
    const dir = mkdtempSync(join(tmpdir(), "trunc-"));
    mkdirSync(join(dir, "fig3"), { recursive: true });
    const source = readFileSync(join(DATA_DIR, "fig3", "comparison.csv"), "utf-8");
    const lines = source.trim().split("\n");
    const header = lines[0].split(",");
    const drop = header.indexOf("se");
    const truncated = lines
      .map((line) => line.split(",").filter((_, i) => i !== drop).join(","))
      .join("\n");
    writeFileSync(join(dir, "fig3", "comparison.csv"), truncated + "\n");
    expect(() => renderRecipe(ALL_FIGURES[0], dir)).toThrowError(
      /missing column "se" in comparison\.csv/,
    );
    rmSync(dir, { recursive: true });
  });

  it("reports unknown figure names", () => {
    expect(() => renderAll(["fig99"], DATA_DIR, mkdtempSync(join(tmpdir(), "f-")))).toThrowError(
      /unknown figure fig99/,
    );
  });
});
