import { describe, expect, it, vi } from "vitest";

import { renderApp, renderRecommendation, renderSweepCurve, type Handlers } from "../src/render";
import { initialState } from "../src/state";
import type { Recommendation, SweepPoint } from "../src/types";

// numbers chosen to have awkward float representations: the UI must render
// String(value) of the parsed payload, never a reformatted version
const REC: Recommendation = {
  id: "p0001",
  features: [
    { name: "exercise", before_raw: 0.1 + 0.2, after_raw: 1.0000000000000002, delta_std: 0.6666666666666666 },
    { name: "alcohol", before_raw: 12.5, after_raw: 12.5, delta_std: 0 },
  ],
  cost_spent: 1.9999999999999998,
  budget: 2,
  before_probability: 0.07000000000000001,
  after_probability: 1e-7,
  objective_trace: [0.07000000000000001, 1e-7],
  trajectory: {
    visits: [1, 2, 3],
    baseline: [0.07000000000000001, 0.08, 0.09],
    optimized: [1e-7, 0.030000000000000002, 0.04],
  },
};

function noopHandlers(): Handlers {
  return {
    onSelectPatient: vi.fn(),
    onPage: vi.fn(),
    onBudgetInput: vi.fn(),
    onBudgetCommit: vi.fn(),
    onLockToggle: vi.fn(),
    onCostEdit: vi.fn(),
    onBoundEdit: vi.fn(),
    onRecompute: vi.fn(),
    onSweep: vi.fn(),
    onSweepBudgets: vi.fn(),
    onRetry: vi.fn(),
  };
}

function textOf(root: HTMLElement, testid: string): string {
  const node = root.querySelector(`[data-testid="${testid}"]`);
  expect(node, testid).not.toBeNull();
  return node!.textContent ?? "";
}

describe("renderRecommendation verbatim display", () => {
  it("every displayed number is String() of the response value", () => {
    const panel = renderRecommendation(REC);
    expect(textOf(panel, "before-probability")).toBe(String(REC.before_probability));
    expect(textOf(panel, "after-probability")).toBe(String(REC.after_probability));
    expect(textOf(panel, "cost-spent")).toBe(String(REC.cost_spent));
    for (const f of REC.features) {
      expect(textOf(panel, `before-${f.name}`)).toBe(String(f.before_raw));
      expect(textOf(panel, `after-${f.name}`)).toBe(String(f.after_raw));
      expect(textOf(panel, `delta-${f.name}`)).toBe(String(f.delta_std));
    }
    REC.trajectory.visits.forEach((v, k) => {
      expect(textOf(panel, `trajectory-baseline-v${v}`)).toBe(
        String(REC.trajectory.baseline[k]),
      );
      expect(textOf(panel, `trajectory-optimized-v${v}`)).toBe(
        String(REC.trajectory.optimized[k]),
      );
    });
  });

  it("snapshot of the rendered panel is stable", () => {
    const panel = renderRecommendation(REC);
    expect(panel.outerHTML).toMatchSnapshot();
  });

  it("zero-delta feature renders exactly 0", () => {
    const panel = renderRecommendation(REC);
    expect(textOf(panel, "delta-alcohol")).toBe("0");
  });
});

describe("renderSweepCurve", () => {
  const points: SweepPoint[] = [
    { budget: 0, after_probability: 0.07, cost_spent: 0 },
    { budget: 1, after_probability: 0.05, cost_spent: 1 },
    { budget: 2, after_probability: 0.030000000000000002, cost_spent: 2 },
    { budget: 4, after_probability: 0.03, cost_spent: 2.5 },
  ];

  it("renders one point per budget with verbatim values", () => {
    const panel = renderSweepCurve(points);
    for (const p of points) {
      expect(textOf(panel, `sweep-point-${p.budget}`)).toBe(
        `B=${String(p.budget)} risk ${String(p.after_probability)}`,
      );
    }
  });

  it("rendered polyline y-coordinates are non-decreasing (risk non-increasing)", () => {
    const panel = renderSweepCurve(points);
    const polyline = panel.querySelector("polyline");
    expect(polyline).not.toBeNull();
    const ys = polyline!
      .getAttribute("points")!
      .split(" ")
      .map((pair) => Number(pair.split(",")[1]));
    for (let k = 1; k < ys.length; k += 1) {
      expect(ys[k]).toBeGreaterThanOrEqual(ys[k - 1] - 1e-9);
    }
  });

  it("single budget renders a single point", () => {
    const panel = renderSweepCurve([points[0]]);
    expect(panel.querySelectorAll("li").length).toBe(1);
  });
});

describe("renderApp states", () => {
  it("empty cohort shows the empty-state message", () => {
    const root = document.createElement("div");
    renderApp(root, initialState(), noopHandlers());
    expect(root.querySelector('[data-testid="empty-patients"]')).not.toBeNull();
  });

  it("large cohort is paginated", () => {
    const root = document.createElement("div");
    const state = initialState();
    state.patients = Array.from({ length: 2000 }, (_, k) => ({
      id: `p${k}`,
      visits: [1, 2, 3],
    }));
    renderApp(root, state, noopHandlers());
    expect(root.querySelectorAll(".patient-list li").length).toBe(50);
    expect(root.querySelector(".pager span")?.textContent).toBe("page 1/40");
  });

  it("service error renders a retry banner that calls the handler", () => {
    const root = document.createElement("div");
    const state = initialState();
    state.error = "service unreachable: boom";
    const handlers = noopHandlers();
    renderApp(root, state, handlers);
    const banner = root.querySelector('[data-testid="error-banner"]');
    expect(banner).not.toBeNull();
    (banner!.querySelector("button") as HTMLButtonElement).click();
    expect(handlers.onRetry).toHaveBeenCalledTimes(1);
  });

  it("empty sweep budget list disables the control", () => {
    const root = document.createElement("div");
    const state = initialState();
    state.patientId = "p1";
    state.sweepBudgets = [];
    renderApp(root, state, noopHandlers());
    const button = root.querySelector('[data-testid="run-sweep"]') as HTMLButtonElement;
    expect(button.disabled).toBe(true);
  });

  it("zero-budget recommendation overlaps the baseline trajectory", () => {
    const root = document.createElement("div");
    const state = initialState();
    state.patientId = "p0001";
    state.recommendation = {
      ...REC,
      features: REC.features.map((f) => ({ ...f, delta_std: 0, after_raw: f.before_raw })),
      cost_spent: 0,
      budget: 0,
      after_probability: REC.before_probability,
      trajectory: {
        visits: [1, 2, 3],
        baseline: [0.07, 0.08, 0.09],
        optimized: [0.07, 0.08, 0.09],
      },
    };
    renderApp(root, state, noopHandlers());
    for (const v of [1, 2, 3]) {
      expect(textOf(root as HTMLElement, `trajectory-baseline-v${v}`)).toBe(
        textOf(root as HTMLElement, `trajectory-optimized-v${v}`),
      );
    }
    for (const f of state.recommendation.features) {
      expect(textOf(root as HTMLElement, `delta-${f.name}`)).toBe("0");
    }
  });
});
