import { verbatim } from "./format";
import { PAGE_SIZE, type SessionState } from "./state";
import type { Recommendation, SweepPoint, Trajectory } from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface Handlers {
  onSelectPatient(id: string): void;
  onPage(page: number): void;
  onBudgetInput(value: number): void;
  onBudgetCommit(): void;
  onLockToggle(name: string, locked: boolean): void;
  onCostEdit(name: string, side: "increase" | "decrease", value: number | null): void;
  onBoundEdit(name: string, side: "lower" | "upper", value: number): void;
  onRecompute(): void;
  onSweep(): void;
  onSweepBudgets(budgets: number[]): void;
  onRetry(): void;
}

export function renderApp(root: HTMLElement, state: SessionState, handlers: Handlers): void {
  root.textContent = "";
  root.appendChild(renderBanner(state, handlers));
  const layout = el("div", "layout");
  layout.appendChild(renderPatientPanel(state, handlers));
  const main = el("div", "main");
  main.appendChild(renderControls(state, handlers));
  main.appendChild(renderResult(state));
  main.appendChild(renderSweepPanel(state, handlers));
  layout.appendChild(main);
  root.appendChild(layout);
}

function renderBanner(state: SessionState, handlers: Handlers): HTMLElement {
  const banner = el("div", "banner");
  if (state.error) {
    banner.classList.add("banner-error");
    banner.setAttribute("data-testid", "error-banner");
    banner.appendChild(el("span", undefined, `service error: ${state.error}`));
    const retry = el("button", undefined, "retry");
    retry.addEventListener("click", () => handlers.onRetry());
    banner.appendChild(retry);
  } else if (state.validation) {
    banner.classList.add("banner-warn");
    banner.setAttribute("data-testid", "validation-banner");
    banner.textContent = state.validation;
  } else if (state.inFlight) {
    banner.classList.add("banner-busy");
    banner.textContent = "optimizing...";
  }
  return banner;
}

function renderPatientPanel(state: SessionState, handlers: Handlers): HTMLElement {
  const panel = el("div", "patients");
  panel.appendChild(el("h2", undefined, "Patients"));
  if (state.patients.length === 0) {
    const empty = el("p", "empty", "no patients available");
    empty.setAttribute("data-testid", "empty-patients");
    panel.appendChild(empty);
    return panel;
  }
  const pages = Math.max(1, Math.ceil(state.patients.length / PAGE_SIZE));
  const start = state.page * PAGE_SIZE;
  const list = el("ul", "patient-list");
  for (const patient of state.patients.slice(start, start + PAGE_SIZE)) {
    const item = el("li");
    const button = el("button", undefined, `${patient.id} (${patient.visits.length} visits)`);
    if (patient.id === state.patientId) button.classList.add("selected");
    button.addEventListener("click", () => handlers.onSelectPatient(patient.id));
    item.appendChild(button);
    list.appendChild(item);
  }
  panel.appendChild(list);
  const pager = el("div", "pager");
  const prev = el("button", undefined, "prev");
  prev.disabled = state.page === 0;
  prev.addEventListener("click", () => handlers.onPage(state.page - 1));
  const next = el("button", undefined, "next");
  next.disabled = state.page >= pages - 1;
  next.addEventListener("click", () => handlers.onPage(state.page + 1));
  pager.appendChild(prev);
  pager.appendChild(el("span", undefined, `page ${state.page + 1}/${pages}`));
  pager.appendChild(next);
  panel.appendChild(pager);
  return panel;
}

function renderControls(state: SessionState, handlers: Handlers): HTMLElement {
  const panel = el("div", "controls");
  panel.appendChild(el("h2", undefined, "Preferences"));
  if (!state.detail) {
    panel.appendChild(el("p", "empty", "select a patient to adjust costs and budget"));
    return panel;
  }

  const budgetRow = el("div", "budget-row");
  budgetRow.appendChild(el("label", undefined, "budget"));
  const slider = el("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = "6";
  slider.step = "0.1";
  slider.value = String(state.budget);
  slider.setAttribute("data-testid", "budget-slider");
  slider.addEventListener("input", () => handlers.onBudgetInput(Number(slider.value)));
  const number = el("input");
  number.type = "number";
  number.min = "0";
  number.step = "0.1";
  number.value = String(state.budget);
  number.setAttribute("data-testid", "budget-number");
  number.addEventListener("change", () => {
    handlers.onBudgetInput(Number(number.value));
    handlers.onBudgetCommit();
  });
  budgetRow.appendChild(slider);
  budgetRow.appendChild(number);
  panel.appendChild(budgetRow);

  const table = el("table", "cost-table");
  const head = el("tr");
  for (const title of ["feature", "raise cost", "lower cost", "min", "max", "locked"]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  for (const row of state.detail.costs) {
    const tr = el("tr");
    tr.appendChild(el("td", undefined, row.name));
    for (const side of ["increase", "decrease"] as const) {
      const td = el("td");
      const input = el("input");
      input.type = "number";
      input.step = "1";
      const override = state.costOverrides[row.name]?.[side];
      const current = override !== undefined ? override : row[side];
      input.value = current === null || current === "locked" ? "" : String(current);
      input.placeholder = "forbidden";
      input.setAttribute("data-testid", `cost-${side}-${row.name}`);
      input.addEventListener("change", () => {
        const value = input.value.trim() === "" ? null : Number(input.value);
        handlers.onCostEdit(row.name, side, value);
      });
      td.appendChild(input);
      tr.appendChild(td);
    }
    for (const side of ["lower", "upper"] as const) {
      const td = el("td");
      const input = el("input");
      input.type = "number";
      input.step = "0.1";
      const override = state.boundOverrides[row.name]?.[side];
      input.value = String(override !== undefined ? override : row[side]);
      input.setAttribute("data-testid", `bound-${side}-${row.name}`);
      input.addEventListener("change", () =>
        handlers.onBoundEdit(row.name, side, Number(input.value)),
      );
      td.appendChild(input);
      tr.appendChild(td);
    }
    const lockTd = el("td");
    const lock = el("input");
    lock.type = "checkbox";
    lock.checked = Boolean(state.locked[row.name]);
    lock.setAttribute("data-testid", `lock-${row.name}`);
    lock.addEventListener("change", () => handlers.onLockToggle(row.name, lock.checked));
    lockTd.appendChild(lock);
    tr.appendChild(lockTd);
    table.appendChild(tr);
  }
  panel.appendChild(table);

  const recompute = el("button", "recompute", "recompute");
  recompute.setAttribute("data-testid", "recompute");
  recompute.disabled = state.inFlight;
  recompute.addEventListener("click", () => handlers.onRecompute());
  panel.appendChild(recompute);
  return panel;
}

function deltaBar(delta: number, maxAbs: number): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", "120");
  svg.setAttribute("height", "12");
  svg.setAttribute("class", "delta-bar");
  const scale = maxAbs > 0 ? 55 / maxAbs : 0;
  const width = Math.abs(delta) * scale;
  const rect = document.createElementNS("http://www.w3.org/2000/svg", "rect");
  rect.setAttribute("y", "1");
  rect.setAttribute("height", "10");
  rect.setAttribute("x", String(delta < 0 ? 60 - width : 60));
  rect.setAttribute("width", String(width));
  rect.setAttribute("fill", delta < 0 ? "#b4543c" : "#3c78b4");
  svg.appendChild(rect);
  const axis = document.createElementNS("http://www.w3.org/2000/svg", "line");
  axis.setAttribute("x1", "60");
  axis.setAttribute("x2", "60");
  axis.setAttribute("y1", "0");
  axis.setAttribute("y2", "12");
  axis.setAttribute("stroke", "#666");
  svg.appendChild(axis);
  return svg;
}

function trajectoryChart(trajectory: Trajectory): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  const width = 260;
  const height = 120;
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "trajectory-chart");
  const all = [...trajectory.baseline, ...trajectory.optimized];
  const top = Math.max(...all, 1e-9);
  const xs = trajectory.visits.map(
    (_, k) => 20 + (k * (width - 40)) / Math.max(trajectory.visits.length - 1, 1),
  );
  const y = (p: number) => height - 15 - (p / top) * (height - 30);
  for (const [series, color] of [
    [trajectory.baseline, "#b43c3c"],
    [trajectory.optimized, "#3c78b4"],
  ] as const) {
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", series.map((p, k) => `${xs[k]},${y(p)}`).join(" "));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", color);
    line.setAttribute("stroke-width", "2");
    svg.appendChild(line);
  }
  return svg;
}

export function renderRecommendation(rec: Recommendation): HTMLElement {
  const panel = el("div", "recommendation");
  panel.setAttribute("data-testid", "recommendation");
  panel.appendChild(el("h2", undefined, "Recommendation"));

  const risk = el("div", "risk-summary");
  const before = el("span", "risk-before");
  before.setAttribute("data-testid", "before-probability");
  before.textContent = verbatim(rec.before_probability);
  const after = el("span", "risk-after");
  after.setAttribute("data-testid", "after-probability");
  after.textContent = verbatim(rec.after_probability);
  risk.appendChild(el("span", undefined, "risk before "));
  risk.appendChild(before);
  risk.appendChild(el("span", undefined, " after "));
  risk.appendChild(after);
  panel.appendChild(risk);

  const gauge = el("div", "cost-gauge");
  gauge.setAttribute("data-testid", "cost-gauge");
  const spent = el("span", "cost-spent");
  spent.setAttribute("data-testid", "cost-spent");
  spent.textContent = verbatim(rec.cost_spent);
  gauge.appendChild(el("span", undefined, "cost spent "));
  gauge.appendChild(spent);
  gauge.appendChild(el("span", undefined, ` of budget ${verbatim(rec.budget)}`));
  const meter = el("div", "meter");
  const fill = el("div", "meter-fill");
  const frac = rec.budget > 0 ? Math.min(rec.cost_spent / rec.budget, 1) : 0;
  fill.style.width = `${frac * 100}%`;
  meter.appendChild(fill);
  gauge.appendChild(meter);
  panel.appendChild(gauge);

  const table = el("table", "feature-table");
  const head = el("tr");
  for (const title of ["feature", "before", "after", "delta (std)", ""]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  const maxAbs = Math.max(...rec.features.map((f) => Math.abs(f.delta_std)), 1e-12);
  for (const feature of rec.features) {
    const tr = el("tr");
    tr.setAttribute("data-testid", `feature-row-${feature.name}`);
    tr.appendChild(el("td", undefined, feature.name));
    const beforeTd = el("td", "num");
    beforeTd.setAttribute("data-testid", `before-${feature.name}`);
    beforeTd.textContent = verbatim(feature.before_raw);
    tr.appendChild(beforeTd);
    const afterTd = el("td", "num");
    afterTd.setAttribute("data-testid", `after-${feature.name}`);
    afterTd.textContent = verbatim(feature.after_raw);
    tr.appendChild(afterTd);
    const deltaTd = el("td", "num");
    deltaTd.setAttribute("data-testid", `delta-${feature.name}`);
    deltaTd.textContent = verbatim(feature.delta_std);
    tr.appendChild(deltaTd);
    const barTd = el("td");
    barTd.appendChild(deltaBar(feature.delta_std, maxAbs));
    tr.appendChild(barTd);
    table.appendChild(tr);
  }
  panel.appendChild(table);

  const traj = el("div", "trajectory");
  traj.appendChild(el("h3", undefined, "Risk trajectory"));
  traj.appendChild(trajectoryChart(rec.trajectory));
  const tTable = el("table", "trajectory-table");
  const tHead = el("tr");
  for (const title of ["visit", "baseline", "optimized"]) {
    tHead.appendChild(el("th", undefined, title));
  }
  tTable.appendChild(tHead);
  rec.trajectory.visits.forEach((visit, k) => {
    const tr = el("tr");
    tr.appendChild(el("td", undefined, String(visit)));
    const base = el("td", "num");
    base.setAttribute("data-testid", `trajectory-baseline-v${visit}`);
    base.textContent = verbatim(rec.trajectory.baseline[k]);
    tr.appendChild(base);
    const opt = el("td", "num");
    opt.setAttribute("data-testid", `trajectory-optimized-v${visit}`);
    opt.textContent = verbatim(rec.trajectory.optimized[k]);
    tr.appendChild(opt);
    tTable.appendChild(tr);
  });
  traj.appendChild(tTable);
  panel.appendChild(traj);
  return panel;
}

function renderResult(state: SessionState): HTMLElement {
  if (state.recommendation) return renderRecommendation(state.recommendation);
  const placeholder = el("div", "recommendation empty");
  placeholder.textContent = state.detail
    ? "press recompute to get a recommendation"
    : "";
  return placeholder;
}

export function renderSweepCurve(points: SweepPoint[]): HTMLElement {
  const panel = el("div", "sweep-curve");
  panel.setAttribute("data-testid", "sweep-curve");
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  const width = 260;
  const height = 120;
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  const top = Math.max(...points.map((p) => p.after_probability), 1e-9);
  const right = Math.max(...points.map((p) => p.budget), 1e-9);
  const x = (b: number) => 20 + (b / right) * (width - 40);
  const y = (p: number) => height - 15 - (p / top) * (height - 30);
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute(
    "points",
    points.map((p) => `${x(p.budget)},${y(p.after_probability)}`).join(" "),
  );
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "#3c78b4");
  line.setAttribute("stroke-width", "2");
  svg.appendChild(line);
  panel.appendChild(svg);
  const list = el("ul", "sweep-points");
  for (const point of points) {
    const item = el("li");
    item.setAttribute("data-testid", `sweep-point-${point.budget}`);
    item.textContent = `B=${verbatim(point.budget)} risk ${verbatim(point.after_probability)}`;
    list.appendChild(item);
  }
  panel.appendChild(list);
  return panel;
}

function renderSweepPanel(state: SessionState, handlers: Handlers): HTMLElement {
  const panel = el("div", "sweep");
  panel.appendChild(el("h2", undefined, "Budget sweep"));
  const input = el("input");
  input.type = "text";
  input.value = state.sweepBudgets.join(",");
  input.setAttribute("data-testid", "sweep-budgets");
  input.addEventListener("change", () => {
    const budgets = input.value
      .split(",")
      .map((s) => s.trim())
      .filter((s) => s.length > 0)
      .map(Number)
      .filter((b) => Number.isFinite(b));
    handlers.onSweepBudgets(budgets);
  });
  panel.appendChild(input);
  const run = el("button", undefined, "sweep");
  run.setAttribute("data-testid", "run-sweep");
  run.disabled = state.sweepBudgets.length === 0 || state.inFlight || !state.patientId;
  run.addEventListener("click", () => handlers.onSweep());
  panel.appendChild(run);
  if (state.sweepPoints && state.sweepPoints.length > 0) {
    panel.appendChild(renderSweepCurve(state.sweepPoints));
  }
  return panel;
}
