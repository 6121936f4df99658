import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { RenderResult } from "../src/api.js";
import { ViewerController } from "../src/controller.js";
import type { ViewerState } from "../src/state.js";
import { DATASETS, META, MockServer, RGBA, pixelOfLabel } from "./mock_server.js";

function harness(server = new MockServer()) {
  const frames: RenderResult[] = [];
  const errors: string[] = [];
  const states: ViewerState[] = [];
  const controller = new ViewerController(server, {
    onFrame: (r) => frames.push(r),
    onError: (m) => errors.push(m),
    onState: (s) => states.push(s),
  });
  return { server, controller, frames, errors, states };
}

const flushMicrotasks = () => new Promise<void>((r) => setTimeout(r, 0));

describe("debounced focal changes", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("a rapid drag issues at most one request per 100 ms window", async () => {
    const { server, controller } = harness();
    await controller.selectDataset(DATASETS[0]);
    const before = server.requests.length; // the select itself rendered

    // 50 slider events, 10 ms apart: 500 ms of dragging
    for (let i = 0; i < 50; i++) {
      controller.setFocal(1 + i * 0.1);
      await vi.advanceTimersByTimeAsync(10);
    }
    await vi.advanceTimersByTimeAsync(200); // let the trailing edge fire
    const issued = server.requests.length - before;
    expect(issued).toBeGreaterThan(0);
    expect(issued).toBeLessThanOrEqual(Math.ceil(500 / 100) + 1);
  });

  it("the final frame matches the final slider value", async () => {
    const { server, controller } = harness();
    await controller.selectDataset(DATASETS[0]);
    for (const v of [1.0, 2.0, 3.0, 4.5]) {
      controller.setFocal(v);
      await vi.advanceTimersByTimeAsync(5);
    }
    await vi.advanceTimersByTimeAsync(300);
    const last = server.requests[server.requests.length - 1];
    expect(last.d_f).toBeCloseTo(4.5, 12);
  });

  it("never sends out-of-range parameters", async () => {
    const { server, controller } = harness();
    await controller.selectDataset(DATASETS[0]);
    controller.setFocal(999);
    controller.setSigmaD(-3);
    controller.setC1(2.0);
    controller.setC2(-0.5);
    await vi.advanceTimersByTimeAsync(300);
    const [lo, hi] = DATASETS[0].disparity_range;
    for (const req of server.requests) {
      expect(req.d_f).toBeGreaterThanOrEqual(lo);
      expect(req.d_f).toBeLessThanOrEqual(hi);
      expect(req.sigma_d).toBeGreaterThan(0);
      expect(req.c1).toBeGreaterThanOrEqual(0);
      expect(req.c1).toBeLessThanOrEqual(1);
      expect(req.c2).toBeGreaterThanOrEqual(0);
      expect(req.c2).toBeLessThanOrEqual(1);
    }
  });
});

describe("stale-response reconciliation", () => {
  it("a slow older response never overwrites a newer frame", async () => {
    const server = new MockServer();
    server.manual = true;
    const { controller, frames } = harness(server);
    const select = controller.selectDataset(DATASETS[0]);
    await flushMicrotasks();
    server.flush(0); // initial render
    await select;
    await flushMicrotasks();
    expect(frames.length).toBe(1);

    controller.setMode("regular"); // request A (immediate)
    controller.setMode("sst");     // request B (immediate)
    expect(server.pending.length).toBe(2);

    server.flush(1); // B (newer) resolves first and is displayed
    await flushMicrotasks();
    expect(frames.length).toBe(2);
    const displayed = frames[frames.length - 1].bytes;

    server.flush(0); // A (older) arrives late -> discarded
    await flushMicrotasks();
    expect(frames.length).toBe(2);
    expect(frames[frames.length - 1].bytes).toBe(displayed);
  });

  it("an error surfaces but keeps the last good frame", async () => {
    const server = new MockServer();
    server.manual = true;
    const { controller, frames, errors } = harness(server);
    const select = controller.selectDataset(DATASETS[0]);
    await flushMicrotasks();
    server.flush(0);
    await select;
    await flushMicrotasks();
    expect(frames.length).toBe(1);

    controller.setMode("regular");
    server.fail(0, "server exploded");
    await flushMicrotasks();
    expect(errors.length).toBe(1);
    expect(frames.length).toBe(1); // previous frame retained
  });
});

describe("pick-and-suppress round trip (mock of the occluded dataset)", () => {
  it("clicking the horse sets the target and changes the pixels", async () => {
    const { server, controller, frames, states } = harness();
    await controller.selectDataset(DATASETS[0]);
    await flushMicrotasks();
    const before = frames[frames.length - 1].bytes;

    const [x, y] = pixelOfLabel(2); // a horse pixel in the central view
    controller.pickTarget(x, y);
    await flushMicrotasks();

    expect(states[states.length - 1].targetLabel).toBe(2);
    expect(server.requests[server.requests.length - 1].target_label).toBe(2);
    const after = frames[frames.length - 1].bytes;
    expect(after).not.toEqual(before);

    // the decoded fixtures differ at real pixels, not just in metadata
    let diff = 0;
    for (let i = 0; i < RGBA.noTarget.length; i++) {
      if (RGBA.noTarget[i] !== RGBA.withTarget[i]) diff++;
    }
    expect(diff).toBeGreaterThan(0);
  });

  it("clicking an unlabeled (background) pixel clears the target", async () => {
    const server = new MockServer();
    // label map with a genuine unlabeled region in the top-left corner
    const labels = new Uint8Array(META.width * META.height).fill(2);
    labels.fill(0, 0, META.width * 4);
    server.getLabels = async () => ({ width: META.width, height: META.height, labels });
    const { controller, states } = harness(server);
    await controller.selectDataset(DATASETS[0]);
    controller.pickTarget(10, 20); // horse region
    await flushMicrotasks();
    expect(states[states.length - 1].targetLabel).toBe(2);
    controller.pickTarget(5, 1); // unlabeled band
    await flushMicrotasks();
    expect(states[states.length - 1].targetLabel).toBeNull();
    expect(server.requests[server.requests.length - 1].target_label ?? null)
      .toBeNull();
  });

  it("toggling sst vs regular produces visibly different frames", async () => {
    const { controller, frames } = harness();
    await controller.selectDataset(DATASETS[0]);
    await flushMicrotasks();
    const sst = frames[frames.length - 1].bytes;
    controller.setMode("regular");
    await flushMicrotasks();
    const regular = frames[frames.length - 1].bytes;
    expect(regular).not.toEqual(sst);
    let diff = 0;
    for (let i = 0; i < RGBA.regular.length; i++) {
      if (RGBA.regular[i] !== RGBA.noTarget[i]) diff++;
    }
    expect(diff).toBeGreaterThan(0);
  });

  it("clicks outside the frame clear the target", async () => {
    const { controller, states } = harness();
    await controller.selectDataset(DATASETS[0]);
    controller.pickTarget(META.width + 10, 5);
    await flushMicrotasks();
    expect(states[states.length - 1].targetLabel).toBeNull();
  });
});
