import type { LabelMap, RenderParams, RenderResult, Transport } from "./api.js";
import { debounce } from "./debounce.js";
import {
  ViewerState,
  clampFocal,
  clampSigma,
  clampUnit,
  initialState,
} from "./state.js";

export interface ViewerHooks {
  /** A fresh (non-stale) frame arrived. */
  onFrame(result: RenderResult): void;
  /** A request failed; the previous frame stays up. */
  onError(message: string): void;
  /** State changed (controls, target badge, latency). */
  onState(state: ViewerState): void;
}

/**
 * UI-independent viewer logic: clamping, the 100 ms render debounce, and
 * last-write-wins reconciliation of in-flight responses by request
 * sequence number. The DOM layer (main.ts) only forwards events here and
 * paints what the hooks deliver.
 */
export class ViewerController {
  private state: ViewerState = initialState();
  private labels: LabelMap | null = null;
  private seq = 0;           // newest request issued
  private displayedSeq = 0;  // newest response painted
  private readonly requestDebounced: (() => void) & { cancel(): void };

  constructor(
    private transport: Transport,
    private hooks: ViewerHooks,
    debounceMs = 100,
  ) {
    this.requestDebounced = debounce(() => this.requestRender(), debounceMs);
  }

  snapshot(): ViewerState {
    return { ...this.state };
  }

  async loadDatasets() {
    return this.transport.getDatasets();
  }

  async selectDataset(info: ViewerState["dataset"]): Promise<void> {
    if (!info) return;
    this.state.dataset = info;
    const [lo, hi] = info.disparity_range;
    this.state.dF = clampFocal(this.state, (lo + hi) / 2);
    this.state.targetLabel = null;
    this.labels = null;
    try {
      this.labels = await this.transport.getLabels(info.id);
    } catch (e) {
      this.hooks.onError(`label map unavailable: ${String(e)}`);
    }
    this.hooks.onState(this.snapshot());
    this.requestRender();
  }

  setFocal(dF: number): void {
    if (!this.state.dataset) return;
    this.state.dF = clampFocal(this.state, dF);
    this.hooks.onState(this.snapshot());
    this.requestDebounced();
  }

  setSigmaD(v: number): void {
    this.state.sigmaD = clampSigma(v);
    this.hooks.onState(this.snapshot());
    this.requestDebounced();
  }

  setC1(v: number): void {
    this.state.c1 = clampUnit(v);
    this.hooks.onState(this.snapshot());
    this.requestDebounced();
  }

  setC2(v: number): void {
    this.state.c2 = clampUnit(v);
    this.hooks.onState(this.snapshot());
    this.requestDebounced();
  }

  setMode(mode: ViewerState["mode"]): void {
    this.state.mode = mode;
    this.hooks.onState(this.snapshot());
    this.requestRender();
  }

  /**
   * Click-to-target: read the semantic label under the clicked pixel of
   * the central view. Background (or a miss) clears the target; anything
   * else becomes the see-through target. Either way a re-render fires.
   */
  pickTarget(x: number, y: number): void {
    if (!this.state.dataset) return;
    let label = 0;
    if (
      this.labels !== null &&
      x >= 0 && y >= 0 && x < this.labels.width && y < this.labels.height
    ) {
      label = this.labels.labels[Math.floor(y) * this.labels.width + Math.floor(x)];
    }
    this.state.targetLabel = label === 0 ? null : label;
    this.hooks.onState(this.snapshot());
    this.requestRender();
  }

  clearTarget(): void {
    this.state.targetLabel = null;
    this.hooks.onState(this.snapshot());
    this.requestRender();
  }

  /** Fire a render immediately (discrete actions); slider paths go
   * through the debouncer instead. */
  requestRender(): void {
    const params = this.buildParams();
    if (params === null) return;
    const seq = ++this.seq;
    this.transport.render(params).then(
      (result) => {
        if (seq <= this.displayedSeq) return; // stale: a newer frame is up
        this.displayedSeq = seq;
        this.state.lastRenderMs = result.renderMs;
        this.hooks.onFrame(result);
        this.hooks.onState(this.snapshot());
      },
      (err) => {
        this.hooks.onError(String(err instanceof Error ? err.message : err));
      },
    );
  }

  buildParams(): RenderParams | null {
    const ds = this.state.dataset;
    if (!ds) return null;
    return {
      dataset: ds.id,
      d_f: this.state.dF,
      sigma_d: this.state.sigmaD,
      c1: this.state.c1,
      c2: this.state.c2,
      target_label: this.state.targetLabel,
      mode: this.state.mode,
    };
  }
}
