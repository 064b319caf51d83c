import { ApiClient, ApiError } from "./api";
import type {
  BoundOverride,
  CostOverride,
  PatientDetail,
  PatientSummary,
  RecommendBody,
  Recommendation,
  SweepBody,
  SweepPoint,
} from "./types";

export interface SessionState {
  patients: PatientSummary[];
  page: number;
  patientId: string | null;
  detail: PatientDetail | null;
  budget: number;
  costOverrides: Record<string, CostOverride>;
  boundOverrides: Record<string, BoundOverride>;
  locked: Record<string, boolean>;
  recommendation: Recommendation | null;
  sweepPoints: SweepPoint[] | null;
  sweepBudgets: number[];
  inFlight: boolean;
  error: string | null;
  validation: string | null;
}

export const PAGE_SIZE = 50;
export const DEBOUNCE_MS = 300;

export function initialState(): SessionState {
  return {
    patients: [],
    page: 0,
    patientId: null,
    detail: null,
    budget: 2,
    costOverrides: {},
    boundOverrides: {},
    locked: {},
    recommendation: null,
    sweepPoints: null,
    sweepBudgets: [0, 1, 2, 4],
    inFlight: false,
    error: null,
    validation: null,
  };
}

export function validateInputs(state: SessionState): string | null {
  if (state.patientId === null) return "select a patient first";
  if (!Number.isFinite(state.budget) || state.budget < 0) {
    return "budget must be a non-negative number";
  }
  for (const [name, bounds] of Object.entries(state.boundOverrides)) {
    if (
      bounds.lower !== undefined &&
      bounds.upper !== undefined &&
      bounds.lower > bounds.upper
    ) {
      return `lower bound above upper bound for ${name}`;
    }
  }
  return null;
}

export function buildRecommendBody(state: SessionState): RecommendBody {
  if (state.patientId === null) throw new Error("no patient selected");
  const body: RecommendBody = { id: state.patientId, budget: state.budget };
  const costs: Record<string, CostOverride> = {};
  for (const [name, override] of Object.entries(state.costOverrides)) {
    costs[name] = { ...override };
  }
  for (const [name, isLocked] of Object.entries(state.locked)) {
    if (isLocked) costs[name] = { increase: "locked", decrease: "locked" };
  }
  if (Object.keys(costs).length > 0) body.cost_overrides = costs;
  if (Object.keys(state.boundOverrides).length > 0) {
    body.bound_overrides = { ...state.boundOverrides };
  }
  return body;
}

export function buildSweepBody(state: SessionState): SweepBody {
  const base = buildRecommendBody(state);
  return {
    id: base.id,
    budgets: [...state.sweepBudgets],
    cost_overrides: base.cost_overrides,
    bound_overrides: base.bound_overrides,
  };
}

/** Drives the UI: one in-flight recommendation at a time, responses for
 * superseded requests are discarded via a monotone sequence number, and
 * slider-driven refreshes are debounced behind an explicit recompute. */
export class Session {
  state: SessionState = initialState();
  private seq = 0;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: SessionState) => void,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  async loadPatients(): Promise<void> {
    try {
      const payload = await this.api.patients();
      this.state.patients = payload.patients;
      this.state.error = null;
    } catch (err) {
      this.state.error = err instanceof ApiError ? err.message : String(err);
    }
    this.emit();
  }

  setPage(page: number): void {
    const pages = Math.max(1, Math.ceil(this.state.patients.length / PAGE_SIZE));
    this.state.page = Math.min(Math.max(page, 0), pages - 1);
    this.emit();
  }

  async selectPatient(id: string): Promise<void> {
    this.seq += 1; // selecting invalidates any in-flight response
    this.state.patientId = id;
    this.state.recommendation = null;
    this.state.sweepPoints = null;
    this.state.costOverrides = {};
    this.state.boundOverrides = {};
    this.state.locked = {};
    this.state.validation = null;
    try {
      this.state.detail = await this.api.patient(id);
      this.state.budget = this.state.detail.default_budget;
      this.state.error = null;
    } catch (err) {
      this.state.detail = null;
      this.state.error = err instanceof ApiError ? err.message : String(err);
    }
    this.emit();
  }

  setBudget(value: number, refresh = true): void {
    this.state.budget = value;
    this.emit();
    if (refresh) this.scheduleRecommend();
  }

  setLocked(name: string, locked: boolean): void {
    this.state.locked = { ...this.state.locked, [name]: locked };
    this.emit();
  }

  setCostOverride(name: string, override: CostOverride): void {
    this.state.costOverrides = { ...this.state.costOverrides, [name]: override };
    this.emit();
  }

  setBoundOverride(name: string, override: BoundOverride): void {
    this.state.boundOverrides = { ...this.state.boundOverrides, [name]: override };
    this.emit();
  }

  setSweepBudgets(budgets: number[]): void {
    this.state.sweepBudgets = budgets;
    this.emit();
  }

  /** Debounced refresh used by slider input. */
  scheduleRecommend(): void {
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      void this.recommend();
    }, this.debounceMs);
  }

  async recommend(): Promise<void> {
    const problem = validateInputs(this.state);
    this.state.validation = problem;
    if (problem !== null) {
      this.emit();
      return;
    }
    const token = ++this.seq;
    this.state.inFlight = true;
    this.emit();
    try {
      const rec = await this.api.recommend(buildRecommendBody(this.state));
      if (token !== this.seq) return; // stale: a newer request took over
      this.state.recommendation = rec;
      this.state.error = null;
    } catch (err) {
      if (token !== this.seq) return;
      this.state.error = err instanceof ApiError ? err.message : String(err);
    } finally {
      if (token === this.seq) {
        this.state.inFlight = false;
        this.emit();
      }
    }
  }

  async runSweep(): Promise<void> {
    const problem = validateInputs(this.state);
    this.state.validation = problem;
    if (problem !== null || this.state.sweepBudgets.length === 0) {
      this.emit();
      return;
    }
    const token = ++this.seq;
    this.state.inFlight = true;
    this.emit();
    try {
      const payload = await this.api.sweep(buildSweepBody(this.state));
      if (token !== this.seq) return;
      this.state.sweepPoints = payload.points;
      this.state.error = null;
    } catch (err) {
      if (token !== this.seq) return;
      this.state.error = err instanceof ApiError ? err.message : String(err);
    } finally {
      if (token === this.seq) {
        this.state.inFlight = false;
        this.emit();
      }
    }
  }
}
