import type { DatasetInfo, RenderMode } from "./api.js";

/** Everything the UI reflects; controls are always clamped to the ranges
 * the selected dataset advertises, so the server never sees out-of-range
 * parameters. */
export interface ViewerState {
  dataset: DatasetInfo | null;
  dF: number;
  sigmaD: number;
  c1: number;
  c2: number;
  targetLabel: number | null;
  mode: RenderMode;
  lastRenderMs: number | null;
}

export const SIGMA_D_RANGE: [number, number] = [0.05, 5.0];

export function initialState(): ViewerState {
  return {
    dataset: null,
    dF: 0,
    sigmaD: 0.5,
    c1: 0.1,
    c2: 0.05,
    targetLabel: null,
    mode: "sst",
    lastRenderMs: null,
  };
}

export function clamp(v: number, lo: number, hi: number): number {
  if (Number.isNaN(v)) return lo;
  return Math.min(hi, Math.max(lo, v));
}

export function clampFocal(state: ViewerState, dF: number): number {
  if (!state.dataset) return dF;
  const [lo, hi] = state.dataset.disparity_range;
  return clamp(dF, lo, hi);
}

export function clampSigma(v: number): number {
  return clamp(v, SIGMA_D_RANGE[0], SIGMA_D_RANGE[1]);
}

export function clampUnit(v: number): number {
  return clamp(v, 0, 1);
}

/** Class name for a label index, per the dataset palette. */
export function className(ds: DatasetInfo | null, label: number | null): string | null {
  if (ds === null || label === null) return null;
  return ds.classes[String(label)] ?? null;
}
