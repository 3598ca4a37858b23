/**
 * Minimal deterministic SVG plotting: linear/log scales, nice ticks,
 * polylines, step curves, markers with error bars, legends, and small
 * multiples. No DOM, no dependencies; the output is a plain SVG string,
 * identical for identical inputs.
 */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  ticks: number[];
}

function niceStep(span: number, target: number): number {
  const raw = span / Math.max(1, target);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const m of [1, 2, 5, 10]) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
  tickCount = 6,
): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const f = (value: number) =>
    range[0] + ((value - d0) / (d1 - d0)) * (range[1] - range[0]);
  const step = niceStep(d1 - d0, tickCount);
  const ticks: number[] = [];
  for (let t = Math.ceil(d0 / step) * step; t <= d1 + 1e-9; t += step) {
    ticks.push(Math.abs(t) < 1e-12 ? 0 : t);
  }
  const scale = f as Scale;
  scale.domain = [d0, d1];
  scale.range = range;
  scale.ticks = ticks;
  return scale;
}

export function logScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0) throw new Error("log scale needs a positive domain");
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const f = (value: number) =>
    range[0] + ((Math.log10(value) - l0) / (l1 - l0)) * (range[1] - range[0]);
  const ticks: number[] = [];
  for (let e = Math.floor(l0); e <= Math.ceil(l1); e++) {
    for (const m of [1, 2, 5]) {
      const t = m * Math.pow(10, e);
      if (t >= d0 * 0.999 && t <= d1 * 1.001) ticks.push(t);
    }
  }
  const scale = f as Scale;
  scale.domain = [d0, d1];
  scale.range = range;
  scale.ticks = ticks;
  return scale;
}

const fmt = (v: number) => {
  const s = Math.abs(v) >= 1e4 || (Math.abs(v) < 1e-3 && v !== 0)
    ? v.toExponential(1)
    : String(Math.round(v * 1e6) / 1e6);
  return s;
};

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
export const MARKERS = ["circle", "square", "diamond", "triangle"] as const;
export type MarkerShape = (typeof MARKERS)[number];

export interface Series {
  label: string;
  color: string;
  x: number[];
  y: number[];
  /** half-width of the error bar per point (already scaled to the band) */
  err?: number[];
  mode: "line" | "markers" | "step";
  dash?: string;
  marker?: MarkerShape;
}

export interface PanelSpec {
  title?: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  yDomain?: [number, number];
  xDomain?: [number, number];
  xLog?: boolean;
  vlines?: { x: number; color: string; label?: string }[];
}

function markerSvg(shape: MarkerShape, cx: number, cy: number, r: number, color: string): string {
  const f = (n: number) => n.toFixed(2);
  switch (shape) {
    case "circle":
      return `<circle cx="${f(cx)}" cy="${f(cy)}" r="${f(r)}" fill="none" stroke="${color}" stroke-width="1.3"/>`;
    case "square":
      return `<rect x="${f(cx - r)}" y="${f(cy - r)}" width="${f(2 * r)}" height="${f(2 * r)}" fill="none" stroke="${color}" stroke-width="1.3"/>`;
    case "diamond":
      return `<path d="M ${f(cx)} ${f(cy - r)} L ${f(cx + r)} ${f(cy)} L ${f(cx)} ${f(cy + r)} L ${f(cx - r)} ${f(cy)} Z" fill="none" stroke="${color}" stroke-width="1.3"/>`;
    case "triangle":
      return `<path d="M ${f(cx)} ${f(cy - r)} L ${f(cx + r)} ${f(cy + r)} L ${f(cx - r)} ${f(cy + r)} Z" fill="none" stroke="${color}" stroke-width="1.3"/>`;
  }
}

function renderPanel(spec: PanelSpec, x0: number, y0: number, width: number, height: number): string {
  const margin = { left: 52, right: 12, top: spec.title ? 26 : 12, bottom: 40 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const left = x0 + margin.left;
  const top = y0 + margin.top;

  const xs = spec.series.flatMap((s) => s.x).concat((spec.vlines ?? []).map((v) => v.x));
  const ys = spec.series.flatMap((s, _i) =>
    s.err ? s.y.flatMap((v, j) => [v - (s.err as number[])[j], v + (s.err as number[])[j]]) : s.y,
  );
  const xDomain = spec.xDomain ?? [Math.min(...xs), Math.max(...xs)];
  let yDomain = spec.yDomain;
  if (!yDomain) {
    const lo = Math.min(...ys);
    const hi = Math.max(...ys);
    const pad = (hi - lo || 1) * 0.06;
    yDomain = [lo - pad, hi + pad];
  }
  const sx = spec.xLog
    ? logScale(xDomain, [left, left + plotW])
    : linearScale(xDomain, [left, left + plotW]);
  const sy = linearScale(yDomain, [top + plotH, top]);

  const parts: string[] = [];
  parts.push(
    `<rect x="${left}" y="${top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333" stroke-width="1"/>`,
  );
  for (const t of sx.ticks) {
    const px = sx(t);
    parts.push(`<line x1="${px.toFixed(2)}" y1="${top + plotH}" x2="${px.toFixed(2)}" y2="${top + plotH + 4}" stroke="#333"/>`);
    parts.push(
      `<text x="${px.toFixed(2)}" y="${top + plotH + 16}" font-size="10" text-anchor="middle" fill="#333">${fmt(t)}</text>`,
    );
    parts.push(`<line x1="${px.toFixed(2)}" y1="${top}" x2="${px.toFixed(2)}" y2="${top + plotH}" stroke="#eee"/>`);
  }
  for (const t of sy.ticks) {
    const py = sy(t);
    parts.push(`<line x1="${left - 4}" y1="${py.toFixed(2)}" x2="${left}" y2="${py.toFixed(2)}" stroke="#333"/>`);
    parts.push(
      `<text x="${left - 7}" y="${(py + 3).toFixed(2)}" font-size="10" text-anchor="end" fill="#333">${fmt(t)}</text>`,
    );
    parts.push(`<line x1="${left}" y1="${py.toFixed(2)}" x2="${left + plotW}" y2="${py.toFixed(2)}" stroke="#eee"/>`);
  }
  parts.push(
    `<text x="${left + plotW / 2}" y="${top + plotH + 32}" font-size="11" text-anchor="middle" fill="#111">${spec.xLabel}</text>`,
  );
  parts.push(
    `<text x="${x0 + 14}" y="${top + plotH / 2}" font-size="11" text-anchor="middle" fill="#111" transform="rotate(-90 ${x0 + 14} ${top + plotH / 2})">${spec.yLabel}</text>`,
  );
  if (spec.title) {
    parts.push(
      `<text x="${left + plotW / 2}" y="${y0 + 16}" font-size="12" text-anchor="middle" fill="#111">${spec.title}</text>`,
    );
  }

  for (const v of spec.vlines ?? []) {
    const px = sx(v.x);
    parts.push(
      `<line x1="${px.toFixed(2)}" y1="${top}" x2="${px.toFixed(2)}" y2="${top + plotH}" stroke="${v.color}" stroke-width="1" stroke-dasharray="2,3"/>`,
    );
  }

  const clamp = (v: number) => Math.max(top, Math.min(top + plotH, v));
  for (const s of spec.series) {
    if (s.mode === "line" || s.mode === "step") {
      const pts: string[] = [];
      s.x.forEach((xv, i) => {
        const px = sx(xv).toFixed(2);
        const py = clamp(sy(s.y[i])).toFixed(2);
        if (i === 0) {
          pts.push(`M ${px} ${py}`);
        } else if (s.mode === "step") {
          const prevY = clamp(sy(s.y[i - 1])).toFixed(2);
          pts.push(`L ${px} ${prevY} L ${px} ${py}`);
        } else {
          pts.push(`L ${px} ${py}`);
        }
      });
      const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
      parts.push(
        `<path d="${pts.join(" ")}" fill="none" stroke="${s.color}" stroke-width="1.5"${dash}/>`,
      );
    } else {
      s.x.forEach((xv, i) => {
        const px = sx(xv);
        const py = clamp(sy(s.y[i]));
        if (s.err) {
          const lo = clamp(sy(s.y[i] - s.err[i]));
          const hi = clamp(sy(s.y[i] + s.err[i]));
          parts.push(
            `<line x1="${px.toFixed(2)}" y1="${lo.toFixed(2)}" x2="${px.toFixed(2)}" y2="${hi.toFixed(2)}" stroke="${s.color}" stroke-width="1"/>`,
          );
        }
        parts.push(markerSvg(s.marker ?? "circle", px, py, 3.2, s.color));
      });
    }
  }
  return parts.join("\n");
}

export interface FigureLayout {
  width?: number;
  panelHeight?: number;
  columns?: number;
  legend?: { label: string; color: string; dash?: string; marker?: MarkerShape }[];
  caption?: string;
}

export function renderFigure(panels: PanelSpec[], layout: FigureLayout = {}): string {
  const columns = layout.columns ?? Math.min(2, panels.length);
  const width = layout.width ?? 760;
  const panelHeight = layout.panelHeight ?? 300;
  const panelWidth = width / columns;
  const rows = Math.ceil(panels.length / columns);
  const legendHeight = layout.legend ? 24 : 0;
  const captionHeight = layout.caption ? 18 : 0;
  const height = rows * panelHeight + legendHeight + captionHeight;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  panels.forEach((panel, i) => {
    const col = i % columns;
    const row = Math.floor(i / columns);
    parts.push(renderPanel(panel, col * panelWidth, row * panelHeight, panelWidth, panelHeight));
  });
  if (layout.legend) {
    const y = rows * panelHeight + 14;
    let x = 56;
    for (const item of layout.legend) {
      if (item.marker) {
        parts.push(markerSvg(item.marker, x + 9, y - 3, 3.2, item.color));
      } else {
        const dash = item.dash ? ` stroke-dasharray="${item.dash}"` : "";
        parts.push(
          `<line x1="${x}" y1="${y - 3}" x2="${x + 18}" y2="${y - 3}" stroke="${item.color}" stroke-width="1.5"${dash}/>`,
        );
      }
      parts.push(`<text x="${x + 23}" y="${y}" font-size="10" fill="#111">${item.label}</text>`);
      x += 23 + 7 * item.label.length + 18;
    }
  }
  if (layout.caption) {
    parts.push(
      `<text x="${width / 2}" y="${height - 5}" font-size="10" text-anchor="middle" fill="#555">${layout.caption}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}
