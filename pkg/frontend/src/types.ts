// Wire types of the advisor service plus the client-side view models.

export type PolicyName = "myopic" | "rpr" | "two_step" | "optimal";

export interface RecommendRequest {
  patient_type: number | string;
  availability: boolean[];
  policy: PolicyName;
}

export interface ScoreBreakdown {
  action: number;
  immediate: number;
  lookahead: number[];
  total: number;
}

export interface Explanation {
  state: string;
  feasible_actions: number[];
  myopic: Record<string, number>;
  rpr: Record<string, ScoreBreakdown>;
  optimality?: Record<string, number>;
}

export interface RecommendResponse {
  action: number;
  facility: string;
  loss: boolean;
  policy: string;
  explanation: Explanation;
}

export interface InstanceInfo {
  digest: string;
  num_types: number;
  num_facilities: number;
  facility_labels: string[];
  type_labels: string[];
  loss_penalty: number;
}

export interface HealthInfo {
  status: string;
  version: string;
  instance: string;
}

// one row of the sweep CSV written by the command-line tool
export interface SweepRow {
  instance_id: number;
  seed: string;
  scenario: number;
  beta: number;
  gamma: number | null;
  delta: number | null;
  K: number;
  g_opt: number;
  g_myopic: number;
  g_rpr: number;
  gap_myopic_pct: number;
  gap_rpr_pct: number;
}
