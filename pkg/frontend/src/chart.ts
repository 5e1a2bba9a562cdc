// Pure string-building helpers for the belief timeline SVG; kept free of DOM
// access so they can be unit-tested in node.

export interface ChartGeometry {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = {
  width: 640,
  height: 220,
  padLeft: 36,
  padRight: 10,
  padTop: 10,
  padBottom: 24,
};

export function xScale(
  index: number,
  count: number,
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): number {
  const inner = geometry.width - geometry.padLeft - geometry.padRight;
  if (count <= 1) return geometry.padLeft;
  return geometry.padLeft + (inner * index) / (count - 1);
}

export function yScale(
  probability: number,
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): number {
  const inner = geometry.height - geometry.padTop - geometry.padBottom;
  return geometry.padTop + inner * (1 - probability);
}

/** SVG polyline points attribute for one probability series. */
export function seriesPoints(
  series: number[],
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): string {
  return series
    .map(
      (p, i) =>
        `${xScale(i, series.length, geometry).toFixed(2)},` +
        `${yScale(p, geometry).toFixed(2)}`,
    )
    .join(" ");
}

/** Marker positions for belief-reset steps. */
export function resetMarkers(
  resetSteps: number[],
  count: number,
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): Array<{ x: number; y: number }> {
  return resetSteps.map((index) => ({
    x: xScale(index, count, geometry),
    y: yScale(1.0, geometry),
  }));
}

export function arIndicatorClass(action: "AR_off" | "AR_on" | null): string {
  if (action === null) return "idle";
  return action === "AR_on" ? "on" : "off";
}

export function formatProbability(p: number): string {
  return p.toFixed(4);
}

export function formatReward(r: number): string {
  return (r >= 0 ? "+" : "") + r.toFixed(4);
}
