/** Wire types for the txlens workbench HTTP API.
 *
 * These mirror the JSON payloads field for field. The dashboard never
 * recomputes a number the API already reports; it only reshapes them
 * for display, so parity with the server schema is the whole contract.
 */

export const CLASS_ORDER = [
  "FUNDING",
  "INCOME_INVOICE",
  "INCOME_CASH",
  "INCOME_CHEQUE",
  "OTHER",
] as const;

export type ClassLabel = (typeof CLASS_ORDER)[number];

/** Lowercase keys used for probability maps, in canonical class order. */
export const WIRE_KEYS = [
  "funding",
  "income_invoice",
  "income_cash",
  "income_cheque",
  "other",
] as const;

export type WireKey = (typeof WIRE_KEYS)[number];

export const WIRE_TO_LABEL: Record<WireKey, ClassLabel> = {
  funding: "FUNDING",
  income_invoice: "INCOME_INVOICE",
  income_cash: "INCOME_CASH",
  income_cheque: "INCOME_CHEQUE",
  other: "OTHER",
};

export type ProbabilityMap = Record<WireKey, number>;

export type MetricName = "accuracy" | "precision" | "recall" | "f_measure";

export interface ClassMetrics {
  label: ClassLabel;
  accuracy: number;
  precision: number;
  recall: number;
  f_measure: number;
  support: number;
  undefined_flags: MetricName[];
}

export interface MetricsResponse {
  model_id: string;
  overall_accuracy: number;
  cohen_kappa: number;
  p: number;
  q: number;
  undefined_flags: string[];
  classes: ClassMetrics[];
  segregation: { correct: string[]; incorrect: string[] };
  schema_version: number;
}

export interface ClassMetricsResponse {
  class: ClassMetrics;
  model_id: string;
  schema_version: number;
}

/** One evaluated transaction as the evidence store reports it. */
export interface RecordView {
  sha: string;
  date: string;
  amount: number;
  description: string;
  customer_id: number;
  bank: string;
  industry: string;
  enrichment_tags: Record<string, string[]>;
  predicted: ClassLabel;
  actual: ClassLabel | null;
  correct: boolean | null;
  probabilities: ProbabilityMap;
}

export interface TransactionsResponse {
  class: ClassLabel;
  correct: boolean | null;
  records: RecordView[];
  metrics: ClassMetrics | null;
  model_id: string;
  schema_version: number;
}

export type MatchMode = "contains" | "exact";

export interface SearchResponse {
  term: string;
  match: MatchMode;
  correct: RecordView[];
  incorrect: RecordView[];
  model_id: string;
  schema_version: number;
}

export interface NeighborView extends RecordView {
  distance: number;
}

export interface NeighborsResponse {
  sha: string;
  groups: string[];
  neighbors: NeighborView[];
  model_id: string;
  schema_version: number;
}

export type Outcome = "TP" | "FP" | "TN" | "FN";

export const OUTCOMES = ["TP", "FP", "TN", "FN"] as const;

export interface VisualizationPoint {
  sha: string;
  x: number;
  outcome: Outcome;
  probability_of_focus: number;
}

export interface VisualizationResponse {
  focus_class: ClassLabel;
  axis: string;
  points: VisualizationPoint[];
  model_id: string;
  schema_version: number;
}

/** Fields a what-if probe may override. */
export interface WhatIfOverrides {
  description?: string;
  amount?: number;
  bank?: string;
  industry?: string;
  date?: string;
}

export interface PredictionView {
  final: ClassLabel;
  probabilities: ProbabilityMap;
}

export interface WhatIfResponse {
  sha: string;
  overrides: WhatIfOverrides;
  baseline: PredictionView;
  modified: PredictionView;
  delta: ProbabilityMap;
  model_id: string;
  schema_version: number;
}

export interface ImportanceGroup {
  group: string;
  mean_drop: number;
  std_drop: number;
  repeats: number;
}

export interface ImportanceResponse {
  model_id: string;
  metric: string;
  baseline: number;
  seed: number;
  groups: ImportanceGroup[];
  schema_version: number;
}
