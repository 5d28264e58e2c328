/** Pure view models for the three discovery branches.
 *
 * Each builder maps one API payload to the values a panel shows.
 * Numbers pass through `display` untouched except for three-decimal
 * rounding of the visible string; nothing is recomputed client side.
 */

import {
  display,
  displaySigned,
  formatAmount,
  type DisplayValue,
} from "./format.js";
import {
  CLASS_ORDER,
  OUTCOMES,
  WIRE_KEYS,
  WIRE_TO_LABEL,
  type ClassLabel,
  type ClassMetrics,
  type ImportanceResponse,
  type MetricsResponse,
  type NeighborsResponse,
  type Outcome,
  type ProbabilityMap,
  type RecordView,
  type SearchResponse,
  type TransactionsResponse,
  type VisualizationResponse,
  type WhatIfResponse,
  type WireKey,
} from "./types.js";

/** A metric cell; flagged metrics render "n/a" but keep the raw value. */
export interface MetricCell {
  display: string;
  full: number;
  isUndefined: boolean;
}

function metricCell(value: number, flagged: boolean): MetricCell {
  const cell = display(value);
  return {
    display: flagged ? "n/a" : cell.display,
    full: cell.full,
    isUndefined: flagged,
  };
}

export interface ProbabilityBar {
  wireKey: WireKey;
  classLabel: ClassLabel;
  display: string;
  full: number;
  /** Bar width in percent of the panel track, clamped to [0, 100]. */
  widthPercent: number;
  /** True on the bar belonging to the final classification. */
  highlighted: boolean;
}

export function probabilityBars(
  probabilities: ProbabilityMap,
  finalLabel: ClassLabel,
): ProbabilityBar[] {
  return WIRE_KEYS.map((key) => {
    const value = probabilities[key];
    const cell = display(value);
    return {
      wireKey: key,
      classLabel: WIRE_TO_LABEL[key],
      display: cell.display,
      full: cell.full,
      widthPercent: Math.min(100, Math.max(0, value * 100)),
      highlighted: WIRE_TO_LABEL[key] === finalLabel,
    };
  });
}

export interface RecordRow {
  sha: string;
  date: string;
  amount: { display: string; full: number };
  description: string;
  bank: string;
  industry: string;
  tags: string[];
  predicted: ClassLabel;
  actual: ClassLabel | null;
  correct: boolean | null;
  probabilities: ProbabilityBar[];
}

export function recordRow(record: RecordView): RecordRow {
  return {
    sha: record.sha,
    date: record.date.slice(0, 10),
    amount: { display: formatAmount(record.amount), full: record.amount },
    description: record.description,
    bank: record.bank,
    industry: record.industry,
    tags: Object.values(record.enrichment_tags).flat(),
    predicted: record.predicted,
    actual: record.actual,
    correct: record.correct,
    probabilities: probabilityBars(record.probabilities, record.predicted),
  };
}

export interface ClassificationHeader {
  classLabel: ClassLabel;
  accuracy: MetricCell;
  precision: MetricCell;
  sensitivity: MetricCell;
  fMeasure: MetricCell;
  support: number;
}

export function classificationHeader(metrics: ClassMetrics): ClassificationHeader {
  const flags = new Set<string>(metrics.undefined_flags);
  return {
    classLabel: metrics.label,
    accuracy: metricCell(metrics.accuracy, flags.has("accuracy")),
    precision: metricCell(metrics.precision, flags.has("precision")),
    sensitivity: metricCell(metrics.recall, flags.has("recall")),
    fMeasure: metricCell(metrics.f_measure, flags.has("f_measure")),
    support: metrics.support,
  };
}

/** Classification branch: one predicted class, optionally split by correctness. */
export interface ClassificationPanel {
  classLabel: ClassLabel;
  correct: boolean | null;
  header: ClassificationHeader | null;
  rows: RecordRow[];
  emptyMessage: string | null;
}

export function buildClassificationPanel(response: TransactionsResponse): ClassificationPanel {
  const rows = response.records.map(recordRow);
  return {
    classLabel: response.class,
    correct: response.correct,
    header: response.metrics ? classificationHeader(response.metrics) : null,
    rows,
    emptyMessage: rows.length > 0 ? null : `no ${response.class} predictions in this slice`,
  };
}

/** Selection state for the classification branch. */
export interface BranchSelection {
  classLabel: ClassLabel;
  correct: boolean | null;
}

/** Correctness toggles never disturb the selected class. */
export function withCorrectness(
  selection: BranchSelection,
  correct: boolean | null,
): BranchSelection {
  return { classLabel: selection.classLabel, correct };
}

export interface OverviewPanel {
  modelId: string;
  overallAccuracy: DisplayValue;
  cohenKappa: DisplayValue;
  correctShas: string[];
  incorrectShas: string[];
  classes: ClassificationHeader[];
}

export function buildOverviewPanel(response: MetricsResponse): OverviewPanel {
  return {
    modelId: response.model_id,
    overallAccuracy: display(response.overall_accuracy),
    cohenKappa: display(response.cohen_kappa),
    correctShas: response.segregation.correct,
    incorrectShas: response.segregation.incorrect,
    classes: response.classes.map(classificationHeader),
  };
}

/** Search branch: matching rows segregated by correctness. */
export interface SearchPanel {
  term: string;
  match: string;
  correct: RecordRow[];
  incorrect: RecordRow[];
}

export function buildSearchPanel(response: SearchResponse): SearchPanel {
  return {
    term: response.term,
    match: response.match,
    correct: response.correct.map(recordRow),
    incorrect: response.incorrect.map(recordRow),
  };
}

export interface NeighborRow extends RecordRow {
  distance: DisplayValue;
}

export interface NeighborsPanel {
  sha: string;
  groups: string[];
  rows: NeighborRow[];
}

export function buildNeighborsPanel(response: NeighborsResponse): NeighborsPanel {
  return {
    sha: response.sha,
    groups: response.groups,
    rows: response.neighbors.map((neighbor) => ({
      ...recordRow(neighbor),
      distance: display(neighbor.distance),
    })),
  };
}

/** What-if probe: baseline and modified predictions side by side. */
export interface WhatIfPanel {
  sha: string;
  overrides: WhatIfResponse["overrides"];
  baseline: { finalLabel: ClassLabel; bars: ProbabilityBar[] };
  modified: { finalLabel: ClassLabel; bars: ProbabilityBar[] };
  delta: { wireKey: WireKey; classLabel: ClassLabel; display: string; full: number }[];
  flipped: boolean;
  zeroDelta: boolean;
  clampNote: string | null;
}

export function buildWhatIfPanel(response: WhatIfResponse): WhatIfPanel {
  const delta = WIRE_KEYS.map((key) => {
    const cell = displaySigned(response.delta[key]);
    return {
      wireKey: key,
      classLabel: WIRE_TO_LABEL[key],
      display: cell.display,
      full: cell.full,
    };
  });
  return {
    sha: response.sha,
    overrides: response.overrides,
    baseline: {
      finalLabel: response.baseline.final,
      bars: probabilityBars(response.baseline.probabilities, response.baseline.final),
    },
    modified: {
      finalLabel: response.modified.final,
      bars: probabilityBars(response.modified.probabilities, response.modified.final),
    },
    delta,
    flipped: response.modified.final !== response.baseline.final,
    zeroDelta: delta.every((entry) => entry.full === 0),
    // amount overrides are clamped server side to the trained range
    clampNote:
      "amount" in response.overrides
        ? "amounts outside the trained range are clamped to its bounds"
        : null,
  };
}

export const OUTCOME_COLORS: Record<Outcome, string> = {
  TP: "#2e7d32",
  FP: "#ef6c00",
  TN: "#546e7a",
  FN: "#c62828",
};

export interface VisualizationPanel {
  focusClass: ClassLabel;
  axis: string;
  points: {
    sha: string;
    x: number;
    outcome: Outcome;
    color: string;
    probability: DisplayValue;
  }[];
  legend: { outcome: Outcome; count: number; color: string }[];
  total: number;
}

export function buildVisualizationPanel(response: VisualizationResponse): VisualizationPanel {
  const counts: Record<Outcome, number> = { TP: 0, FP: 0, TN: 0, FN: 0 };
  const points = response.points.map((point) => {
    counts[point.outcome] += 1;
    return {
      sha: point.sha,
      x: point.x,
      outcome: point.outcome,
      color: OUTCOME_COLORS[point.outcome],
      probability: display(point.probability_of_focus),
    };
  });
  return {
    focusClass: response.focus_class,
    axis: response.axis,
    points,
    legend: OUTCOMES.map((outcome) => ({
      outcome,
      count: counts[outcome],
      color: OUTCOME_COLORS[outcome],
    })),
    total: response.points.length,
  };
}

export interface ImportancePanel {
  modelId: string;
  metric: string;
  baseline: DisplayValue;
  rows: {
    group: string;
    meanDrop: DisplayValue;
    stdDrop: DisplayValue;
    repeats: number;
  }[];
}

export function buildImportancePanel(response: ImportanceResponse): ImportancePanel {
  // stable sort: ties keep the server's canonical group order
  const ranked = [...response.groups].sort((a, b) => b.mean_drop - a.mean_drop);
  return {
    modelId: response.model_id,
    metric: response.metric,
    baseline: display(response.baseline),
    rows: ranked.map((group) => ({
      group: group.group,
      meanDrop: displaySigned(group.mean_drop),
      stdDrop: display(group.std_drop),
      repeats: group.repeats,
    })),
  };
}

/** Classes in canonical order, for selector widgets. */
export function classOptions(): readonly ClassLabel[] {
  return CLASS_ORDER;
}
