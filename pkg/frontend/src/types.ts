// Wire shapes of the recommendation service. Field names mirror the JSON
// payloads exactly; every numeric value is displayed verbatim, never recomputed.

export interface PatientSummary {
  id: string;
  visits: number[];
}

export interface PatientsResponse {
  patients: PatientSummary[];
  count: number;
}

export interface FeatureValue {
  name: string;
  kind: "continuous" | "binary";
  value: number;
}

export interface CostRow {
  name: string;
  increase: number | null;
  decrease: number | null;
  lower: number;
  upper: number;
}

export interface VisitRisk {
  visit: number;
  probability: number;
}

export interface PatientDetail {
  id: string;
  features: {
    unchangeable: FeatureValue[];
    indirect: FeatureValue[];
    direct: FeatureValue[];
  };
  costs: CostRow[];
  risks: VisitRisk[];
  default_budget: number;
}

export interface RecommendationFeature {
  name: string;
  before_raw: number;
  after_raw: number;
  delta_std: number;
  cost_spent?: number;
}

export interface Trajectory {
  visits: number[];
  baseline: number[];
  optimized: number[];
}

export interface Recommendation {
  id: string;
  features: RecommendationFeature[];
  cost_spent: number;
  budget: number;
  before_probability: number;
  after_probability: number;
  objective_trace: number[];
  trajectory: Trajectory;
}

export interface SweepPoint {
  budget: number;
  after_probability: number;
  cost_spent: number;
}

export interface SweepResponse {
  id: string;
  points: SweepPoint[];
}

export type CostSide = number | "locked" | null;

export interface CostOverride {
  increase?: CostSide;
  decrease?: CostSide;
}

export interface BoundOverride {
  lower?: number;
  upper?: number;
}

export interface RecommendBody {
  id: string;
  budget: number;
  cost_overrides?: Record<string, CostOverride>;
  bound_overrides?: Record<string, BoundOverride>;
}

export interface SweepBody {
  id: string;
  budgets: number[];
  cost_overrides?: Record<string, CostOverride>;
  bound_overrides?: Record<string, BoundOverride>;
}
