/**
 * One recipe per bundled experiment. Inputs are the CSVs written by
 * `rachsim compare` (plus `rachsim optimal-density` for the density
 * optimum); outputs are standalone SVGs.
 */

import { Table } from "./csv.js";
import {
  COMPARISON_COLUMNS,
  FigureRecipe,
  groupBy,
  metricRows,
  num,
  parseLabel,
  renderFigure,
  schemeColor,
  schemeLegend,
  schemeMarker,
  slotPanel,
} from "./recipes.js";
import { PanelSpec, PALETTE, Series } from "./svg.js";

const CMP = COMPARISON_COLUMNS;

function gammaOf(label: string): number {
  return Number(parseLabel(label)["gamma_db"]);
}

export const fig3: FigureRecipe = {
  name: "fig3",
  description: "single-slot success and detection probability vs SINR threshold",
  inputs: { "fig3/comparison.csv": CMP },
  build(tables) {
    const table = tables["fig3/comparison.csv"];
    const series: Series[] = [];
    const metrics: [string, string, string][] = [
      ["P", "success", PALETTE[0]],
      ["Pdet", "detection", PALETTE[1]],
    ];
    for (const [metric, label, color] of metrics) {
      const rows = metricRows(table, metric).sort((a, b) => gammaOf(a.label) - gammaOf(b.label));
      series.push({
        label: `${label} (model)`,
        color,
        x: rows.map((r) => gammaOf(r.label)),
        y: rows.map((r) => num(r, "analytical")),
        mode: "line",
      });
      series.push({
        label: `${label} (sim)`,
        color,
        x: rows.map((r) => gammaOf(r.label)),
        y: rows.map((r) => num(r, "simulated")),
        err: rows.map((r) => 3 * num(r, "se")),
        mode: "markers",
        marker: metric === "P" ? "circle" : "square",
      });
    }
    const panel: PanelSpec = {
      xLabel: "SINR threshold (dB)",
      yLabel: "probability",
      yDomain: [0, 1.02],
      series,
    };
    return renderFigure([panel], {
      columns: 1,
      legend: [
        { label: "success model", color: PALETTE[0] },
        { label: "success sim", color: PALETTE[0], marker: "circle" },
        { label: "detection model", color: PALETTE[1] },
        { label: "detection sim", color: PALETTE[1], marker: "square" },
      ],
      caption: "first slot; markers carry 3-se bars",
    });
  },
};

export const fig4: FigureRecipe = {
  name: "fig4",
  description: "backlog CDFs: exact vs Poisson surrogate vs simulation",
  inputs: {
    "fig4/cdf.csv": ["label", "scheme", "slot", "y", "cdf_exact", "cdf_poisson", "cdf_sim", "cdf_sim_se"],
  },
  build(tables) {
    const table = tables["fig4/cdf.csv"];
    const panels: PanelSpec[] = [];
    const byTau = groupBy(table.rows, (r) => r.label);
    const tauLabels = [...byTau.keys()].sort(
      (a, b) => Number(parseLabel(a)["tau_ms"]) - Number(parseLabel(b)["tau_ms"]),
    );
    for (const label of tauLabels) {
      const series: Series[] = [];
      const bySlot = groupBy(byTau.get(label)!, (r) => r.slot);
      for (const [slot, rows] of bySlot) {
        const sorted = [...rows].sort((a, b) => num(a, "y") - num(b, "y"));
        const color = slot === "2" ? PALETTE[0] : PALETTE[1];
        const xs = sorted.map((r) => num(r, "y"));
        series.push({
          label: `slot ${slot} exact`,
          color,
          x: xs,
          y: sorted.map((r) => num(r, "cdf_exact")),
          mode: "step",
        });
        series.push({
          label: `slot ${slot} Poisson`,
          color,
          x: xs,
          y: sorted.map((r) => num(r, "cdf_poisson")),
          mode: "step",
          dash: "4,3",
        });
        series.push({
          label: `slot ${slot} sim`,
          color,
          x: xs,
          y: sorted.map((r) => num(r, "cdf_sim")),
          err: sorted.map((r) => 3 * num(r, "cdf_sim_se")),
          mode: "markers",
          marker: slot === "2" ? "circle" : "triangle",
        });
      }
      panels.push({
        title: label.replace("tau_ms=", "slot length ") + " ms",
        xLabel: "backlogged packets",
        yLabel: "CDF",
        yDomain: [0, 1.04],
        series,
      });
    }
    return renderFigure(panels, {
      columns: 2,
      panelHeight: 240,
      legend: [
        { label: "slot 2 exact", color: PALETTE[0] },
        { label: "slot 2 Poisson", color: PALETTE[0], dash: "4,3" },
        { label: "slot 2 sim", color: PALETTE[0], marker: "circle" },
        { label: "slot 3 exact", color: PALETTE[1] },
        { label: "slot 3 Poisson", color: PALETTE[1], dash: "4,3" },
        { label: "slot 3 sim", color: PALETTE[1], marker: "triangle" },
      ],
    });
  },
};

export const fig5: FigureRecipe = {
  name: "fig5",
  description: "success probability vs device/BS density ratio",
  inputs: { "fig5/comparison.csv": CMP },
  build(tables) {
    const rows = metricRows(tables["fig5/comparison.csv"], "P");
    const bySeries = groupBy(rows, (r) => {
      const parts = parseLabel(r.label);
      return `alpha=${parts["alpha"]} tau=${parts["tau_ms"]}ms`;
    });
    const series: Series[] = [];
    const legend: { label: string; color: string; marker?: "circle" }[] = [];
    let i = 0;
    for (const [name, seriesRows] of bySeries) {
      const sorted = [...seriesRows].sort(
        (a, b) => Number(parseLabel(a.label)["ratio"]) - Number(parseLabel(b.label)["ratio"]),
      );
      const color = PALETTE[i % PALETTE.length];
      const xs = sorted.map((r) => Number(parseLabel(r.label)["ratio"]));
      series.push({
        label: `${name} model`,
        color,
        x: xs,
        y: sorted.map((r) => num(r, "analytical")),
        mode: "line",
      });
      series.push({
        label: `${name} sim`,
        color,
        x: xs,
        y: sorted.map((r) => num(r, "simulated")),
        err: sorted.map((r) => 3 * num(r, "se")),
        mode: "markers",
        marker: "circle",
      });
      legend.push({ label: name, color });
      i += 1;
    }
    const panel: PanelSpec = {
      xLabel: "device/BS density ratio (per preamble)",
      yLabel: "success probability",
      xLog: true,
      yDomain: [0, 1.02],
      series,
    };
    return renderFigure([panel], {
      columns: 1,
      legend,
      caption: "first slot; lines analytical, markers simulated with 3-se bars",
    });
  },
};

export const fig6: FigureRecipe = {
  name: "fig6",
  description: "received packets per BS vs BS density with closed-form optimum",
  inputs: {
    "fig6/comparison.csv": CMP,
    "fig6/optimal.csv": ["gamma_th_db", "lambda_b_star_per_km2"],
  },
  build(tables) {
    const rows = metricRows(tables["fig6/comparison.csv"], "C");
    const stars = tables["fig6/optimal.csv"].rows;
    const byGamma = groupBy(rows, (r) => parseLabel(r.label)["gamma_db"]);
    const series: Series[] = [];
    const vlines: { x: number; color: string }[] = [];
    let i = 0;
    for (const [gamma, gRows] of byGamma) {
      const sorted = [...gRows].sort(
        (a, b) => Number(parseLabel(a.label)["lambda_b"]) - Number(parseLabel(b.label)["lambda_b"]),
      );
      const color = PALETTE[i % PALETTE.length];
      const xs = sorted.map((r) => Number(parseLabel(r.label)["lambda_b"]));
      series.push({
        label: `${gamma} dB model`, color, x: xs,
        y: sorted.map((r) => num(r, "analytical")), mode: "line",
      });
      series.push({
        label: `${gamma} dB sim`, color, x: xs,
        y: sorted.map((r) => num(r, "simulated")),
        err: sorted.map((r) => 3 * num(r, "se")),
        mode: "markers", marker: "circle",
      });
      const star = stars.find((s) => Number(s["gamma_th_db"]) === Number(gamma));
      if (star) vlines.push({ x: num(star, "lambda_b_star_per_km2"), color });
      i += 1;
    }
    const panel: PanelSpec = {
      xLabel: "BS density (per km^2)",
      yLabel: "received packets per BS",
      xLog: true,
      series,
      vlines,
    };
    return renderFigure([panel], {
      columns: 1,
      legend: [...byGamma.keys()].map((g, j) => ({
        label: `gamma ${g} dB`, color: PALETTE[j % PALETTE.length],
      })),
      caption: "dashed verticals: closed-form optimal density",
    });
  },
};

function perSlotFigure(name: string, metric: string, yLabel: string): FigureRecipe {
  return {
    name,
    description: `per-slot ${yLabel} per scheme`,
    inputs: { [`${name}/comparison.csv`]: CMP },
    build(tables: Record<string, Table>) {
      const rows = metricRows(tables[`${name}/comparison.csv`], metric);
      const byGamma = groupBy(rows, (r) => r.label);
      const labels = [...byGamma.keys()].sort((a, b) => gammaOf(a) - gammaOf(b));
      const panels = labels.map((label) =>
        slotPanel(byGamma.get(label)!, label.replace("gamma_db=", "threshold ") + " dB", yLabel),
      );
      const schemes = [...new Set(rows.map((r) => r.scheme))].sort();
      return renderFigure(panels, {
        columns: Math.min(2, panels.length),
        legend: schemeLegend(schemes),
      });
    },
  };
}

export const fig7 = perSlotFigure("fig7", "P", "success probability");
export const fig8 = perSlotFigure("fig8", "EQ", "mean queue length");
export const fig9 = perSlotFigure("fig9", "P", "success probability");

export const fig10: FigureRecipe = {
  name: "fig10",
  description: "ten-slot means of success probability and received packets",
  inputs: { "fig10/comparison.csv": CMP },
  build(tables) {
    const table = tables["fig10/comparison.csv"];
    const panels: PanelSpec[] = [];
    for (const [metric, yLabel] of [
      ["mean_P", "mean success probability"],
      ["mean_C", "mean received packets per BS"],
    ] as const) {
      const rows = metricRows(table, metric);
      const series: Series[] = [];
      for (const [scheme, schemeRows] of groupBy(rows, (r) => r.scheme)) {
        const sorted = [...schemeRows].sort((a, b) => gammaOf(a.label) - gammaOf(b.label));
        const color = schemeColor(scheme);
        const xs = sorted.map((r) => gammaOf(r.label));
        series.push({
          label: `${scheme} model`, color, x: xs,
          y: sorted.map((r) => num(r, "analytical")), mode: "line",
        });
        series.push({
          label: `${scheme} sim`, color, x: xs,
          y: sorted.map((r) => num(r, "simulated")),
          err: sorted.map((r) => 3 * num(r, "se")),
          mode: "markers", marker: schemeMarker(scheme),
        });
      }
      panels.push({ xLabel: "SINR threshold (dB)", yLabel, series });
    }
    const schemes = [...new Set(table.rows.map((r) => r.scheme))].sort();
    return renderFigure(panels, { columns: 2, legend: schemeLegend(schemes) });
  },
};

export const ALL_FIGURES: FigureRecipe[] = [fig3, fig4, fig5, fig6, fig7, fig8, fig9, fig10];
