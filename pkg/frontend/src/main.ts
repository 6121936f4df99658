import { HttpTransport, RenderResult } from "./api.js";
import { ViewerController } from "./controller.js";
import { ViewerState, className } from "./state.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const datasetSel = $<HTMLSelectElement>("dataset");
const frame = $<HTMLImageElement>("frame");
const dfSlider = $<HTMLInputElement>("df");
const dfValue = $<HTMLSpanElement>("df-value");
const sigmaSlider = $<HTMLInputElement>("sigma-d");
const sigmaValue = $<HTMLSpanElement>("sigma-value");
const c1Slider = $<HTMLInputElement>("c1");
const c1Value = $<HTMLSpanElement>("c1-value");
const c2Slider = $<HTMLInputElement>("c2");
const c2Value = $<HTMLSpanElement>("c2-value");
const modeToggle = $<HTMLInputElement>("mode-sst");
const badge = $<HTMLSpanElement>("target-badge");
const clearBtn = $<HTMLButtonElement>("clear-target");
const latency = $<HTMLSpanElement>("latency");
const toast = $<HTMLDivElement>("toast");

let lastUrl: string | null = null;
let toastTimer: ReturnType<typeof setTimeout> | null = null;

function showFrame(result: RenderResult): void {
  const blob = new Blob([result.bytes.buffer as ArrayBuffer], { type: "image/png" });
  const url = URL.createObjectURL(blob);
  frame.src = url;
  if (lastUrl) URL.revokeObjectURL(lastUrl);
  lastUrl = url;
}

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  if (toastTimer) clearTimeout(toastTimer);
  toastTimer = setTimeout(() => toast.classList.remove("visible"), 4000);
}

function reflect(state: ViewerState): void {
  if (state.dataset) {
    const [lo, hi] = state.dataset.disparity_range;
    dfSlider.min = String(lo);
    dfSlider.max = String(hi);
    dfSlider.step = "0.05";
    dfSlider.disabled = false;
  }
  dfSlider.value = String(state.dF);
  dfValue.textContent = state.dF.toFixed(2);
  sigmaSlider.value = String(state.sigmaD);
  sigmaValue.textContent = state.sigmaD.toFixed(2);
  c1Slider.value = String(state.c1);
  c1Value.textContent = state.c1.toFixed(2);
  c2Slider.value = String(state.c2);
  c2Value.textContent = state.c2.toFixed(2);
  modeToggle.checked = state.mode === "sst";
  const name = className(state.dataset, state.targetLabel);
  badge.textContent = name ? `target: ${name}` : "no target";
  badge.classList.toggle("active", name !== null);
  latency.textContent =
    state.lastRenderMs === null ? "" : `${state.lastRenderMs.toFixed(0)} ms`;
}

const controller = new ViewerController(new HttpTransport(""), {
  onFrame: showFrame,
  onError: showToast,
  onState: reflect,
});

datasetSel.addEventListener("change", () => {
  const info = datasets.find((d) => d.id === datasetSel.value);
  if (info) void controller.selectDataset(info);
});
dfSlider.addEventListener("input", () => controller.setFocal(parseFloat(dfSlider.value)));
sigmaSlider.addEventListener("input", () =>
  controller.setSigmaD(parseFloat(sigmaSlider.value)));
c1Slider.addEventListener("input", () => controller.setC1(parseFloat(c1Slider.value)));
c2Slider.addEventListener("input", () => controller.setC2(parseFloat(c2Slider.value)));
modeToggle.addEventListener("change", () =>
  controller.setMode(modeToggle.checked ? "sst" : "regular"));
clearBtn.addEventListener("click", () => controller.clearTarget());

frame.addEventListener("click", (ev) => {
  const rect = frame.getBoundingClientRect();
  if (rect.width === 0 || rect.height === 0 || !frame.naturalWidth) return;
  const x = ((ev.clientX - rect.left) / rect.width) * frame.naturalWidth;
  const y = ((ev.clientY - rect.top) / rect.height) * frame.naturalHeight;
  controller.pickTarget(x, y);
});

let datasets: Awaited<ReturnType<typeof controller.loadDatasets>> = [];

async function boot(): Promise<void> {
  try {
    datasets = await controller.loadDatasets();
  } catch (e) {
    showToast(`cannot reach render service: ${String(e)}`);
    return;
  }
  datasetSel.innerHTML = "";
  for (const ds of datasets) {
    const opt = document.createElement("option");
    opt.value = ds.id;
    opt.textContent = `${ds.id} (${ds.grid_cols}x${ds.grid_rows}, ${ds.width}x${ds.height})`;
    datasetSel.append(opt);
  }
  if (datasets.length > 0) {
    datasetSel.value = datasets[0].id;
    await controller.selectDataset(datasets[0]);
  } else {
    showToast("no datasets loaded on the server");
  }
}

void boot();
