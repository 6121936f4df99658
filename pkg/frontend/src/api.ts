/**
 * Typed client for the sstlf render service. The viewer talks to the
 * backend only through this HTTP contract; tests substitute the Transport
 * with a mock.
 */

export interface DatasetInfo {
  id: string;
  grid_rows: number;
  grid_cols: number;
  width: number;
  height: number;
  disparity_range: [number, number];
  classes: Record<string, string>;
}

export type RenderMode = "sst" | "regular";

export interface RenderParams {
  dataset: string;
  d_f: number;
  sigma_d: number;
  c1: number;
  c2: number;
  target_label?: number | null;
  mode: RenderMode;
}

export interface RenderResult {
  bytes: Uint8Array;
  renderMs: number | null;
}

/** Central-view label indices, one byte per pixel (0 = background). */
export interface LabelMap {
  width: number;
  height: number;
  labels: Uint8Array;
}

export interface Transport {
  getDatasets(): Promise<DatasetInfo[]>;
  render(params: RenderParams): Promise<RenderResult>;
  getLabels(dataset: string): Promise<LabelMap>;
}

export class HttpError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** fetch-based Transport; baseUrl "" when served from the same origin. */
export class HttpTransport implements Transport {
  constructor(private baseUrl: string = "") {}

  async getDatasets(): Promise<DatasetInfo[]> {
    const resp = await fetch(`${this.baseUrl}/datasets`);
    if (!resp.ok) throw new HttpError(resp.status, `GET /datasets: ${resp.status}`);
    return (await resp.json()) as DatasetInfo[];
  }

  async render(params: RenderParams): Promise<RenderResult> {
    const body: Record<string, unknown> = {
      dataset: params.dataset,
      d_f: params.d_f,
      sigma_d: params.sigma_d,
      c1: params.c1,
      c2: params.c2,
      mode: params.mode,
    };
    if (params.target_label !== null && params.target_label !== undefined) {
      body.target_label = params.target_label;
    }
    const resp = await fetch(`${this.baseUrl}/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const err = (await resp.json()) as { error?: string };
        if (err.error) detail = err.error;
      } catch {
        /* not JSON */
      }
      throw new HttpError(resp.status, `render failed: ${detail}`);
    }
    const ms = resp.headers.get("X-Render-Ms");
    return {
      bytes: new Uint8Array(await resp.arrayBuffer()),
      renderMs: ms === null ? null : parseFloat(ms),
    };
  }

  async getLabels(dataset: string): Promise<LabelMap> {
    const resp = await fetch(`${this.baseUrl}/datasets/${dataset}/labels.png`);
    if (!resp.ok) throw new HttpError(resp.status, `labels fetch: ${resp.status}`);
    const blob = await resp.blob();
    return decodeLabelPng(blob);
  }
}

/** Decode the grayscale label PNG via canvas; the red channel carries the
 * class index. Browser-only (tests construct LabelMaps directly). */
export async function decodeLabelPng(blob: Blob): Promise<LabelMap> {
  const bitmap = await createImageBitmap(blob);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unavailable");
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  const labels = new Uint8Array(bitmap.width * bitmap.height);
  for (let i = 0; i < labels.length; i++) {
    labels[i] = data[i * 4];
  }
  return { width: bitmap.width, height: bitmap.height, labels };
}
