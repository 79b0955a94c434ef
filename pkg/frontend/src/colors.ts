// Color assignments shared by the mesh, the overlays, and the panel chips.

export type RGB = [number, number, number];

const PALETTE: RGB[] = [
  [0.47, 0.47, 0.47], // class 0 (typically floor) stays muted
  [0.86, 0.37, 0.34],
  [0.36, 0.65, 0.36],
  [0.35, 0.45, 0.8],
  [0.82, 0.66, 0.25],
  [0.62, 0.36, 0.71],
  [0.25, 0.71, 0.72],
  [0.9, 0.52, 0.25],
  [0.55, 0.55, 0.86],
  [0.72, 0.79, 0.3],
];

export const UNLABELED: RGB = [0.25, 0.25, 0.28];
export const SELECTED: RGB = [1.0, 1.0, 0.55];
export const DIFF_GREEN: RGB = [0.18, 0.62, 0.35];
export const DIFF_RED: RGB = [0.82, 0.19, 0.19];

export function classColor(classId: number): RGB {
  if (classId < 0) return UNLABELED;
  return PALETTE[classId % PALETTE.length];
}

// blue -> red ramp for heat in [0, 1]
export function heatColor(t: number): RGB {
  const x = Math.min(1, Math.max(0, t));
  return [0.15 + 0.8 * x, 0.18 + 0.25 * (1 - Math.abs(2 * x - 1)), 0.9 - 0.75 * x];
}

export function cssColor([r, g, b]: RGB): string {
  const c = (v: number) => Math.round(v * 255);
  return `rgb(${c(r)}, ${c(g)}, ${c(b)})`;
}
