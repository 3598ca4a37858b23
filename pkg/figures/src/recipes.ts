/**
 * Figure recipes: which CSVs to read, which columns they must carry, and
 * how the values map onto panels. Rendering never recomputes model
 * quantities; everything plotted is a column emitted by the primary tool.
 */

import { existsSync } from "node:fs";
import { join } from "node:path";

import { groupBy, num, parseLabel, readCsv, Row, Table } from "./csv.js";
import { MarkerShape, PanelSpec, PALETTE, renderFigure, Series } from "./svg.js";

export interface FigureRecipe {
  name: string;
  description: string;
  /** input CSV path (relative to the data dir) -> columns it must carry */
  inputs: Record<string, string[]>;
  build(tables: Record<string, Table>): string;
}

export const COMPARISON_COLUMNS = [
  "experiment", "label", "scheme", "slot", "metric", "analytical", "simulated", "se",
];

export function loadInputs(recipe: FigureRecipe, dataDir: string): Record<string, Table> {
  const tables: Record<string, Table> = {};
  for (const [rel, required] of Object.entries(recipe.inputs)) {
    const path = join(dataDir, rel);
    if (!existsSync(path)) {
      throw new Error(`input CSV not found: ${path}`);
    }
    tables[rel] = readCsv(path, required);
  }
  return tables;
}

export function renderRecipe(recipe: FigureRecipe, dataDir: string): string {
  return recipe.build(loadInputs(recipe, dataDir));
}

export const SCHEME_ORDER = ["baseline", "acb(0.9)", "acb(0.5)", "acb(0.3)", "backoff(1)"];

export function schemeColor(label: string): string {
  const idx = SCHEME_ORDER.indexOf(label);
  return PALETTE[(idx >= 0 ? idx : SCHEME_ORDER.length) % PALETTE.length];
}

export function schemeMarker(label: string): MarkerShape {
  const markers: MarkerShape[] = ["circle", "square", "diamond", "triangle", "circle"];
  const idx = SCHEME_ORDER.indexOf(label);
  return markers[(idx >= 0 ? idx : 0) % markers.length];
}

export function metricRows(table: Table, metric: string): Row[] {
  const rows = table.rows.filter((r) => r.metric === metric);
  if (rows.length === 0) {
    throw new Error(`no rows with metric=${metric} in ${table.path}`);
  }
  return rows;
}

/**
 * Per-slot panel used by the multi-slot figures: analytical line plus
 * simulated markers with +/-3 se bars, one pair per scheme.
 */
export function slotPanel(rows: Row[], title: string, yLabel: string): PanelSpec {
  const series: Series[] = [];
  for (const [scheme, schemeRows] of groupBy(rows, (r) => r.scheme)) {
    const sorted = [...schemeRows].sort((a, b) => num(a, "slot") - num(b, "slot"));
    const x = sorted.map((r) => num(r, "slot"));
    const color = schemeColor(scheme);
    series.push({
      label: `${scheme} (model)`,
      color,
      x,
      y: sorted.map((r) => num(r, "analytical")),
      mode: "line",
    });
    series.push({
      label: `${scheme} (sim)`,
      color,
      x,
      y: sorted.map((r) => num(r, "simulated")),
      err: sorted.map((r) => 3 * num(r, "se")),
      mode: "markers",
      marker: schemeMarker(scheme),
    });
  }
  return { title, xLabel: "time slot", yLabel, series };
}

export function schemeLegend(schemes: string[]) {
  return schemes.flatMap((s) => [
    { label: `${s} model`, color: schemeColor(s) },
    { label: `${s} sim`, color: schemeColor(s), marker: schemeMarker(s) },
  ]);
}

export { groupBy, num, parseLabel, renderFigure };
