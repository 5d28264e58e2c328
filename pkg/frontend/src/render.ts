/** HTML renderers for the panel view models.
 *
 * Pure string builders: view model in, markup out. Full-precision
 * values ride on title attributes so hovering any rounded number
 * reveals the exact API value.
 */

import type {
  ClassificationHeader,
  ClassificationPanel,
  ImportancePanel,
  MetricCell,
  NeighborsPanel,
  ProbabilityBar,
  RecordRow,
  SearchPanel,
  VisualizationPanel,
  WhatIfPanel,
} from "./panels.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function metricSpan(name: string, cell: MetricCell): string {
  return (
    `<span class="metric" title="${name}: ${cell.full}">` +
    `<label>${escapeHtml(name)}</label> ${escapeHtml(cell.display)}</span>`
  );
}

export function renderBars(bars: ProbabilityBar[]): string {
  const rows = bars.map((bar) => {
    const highlight = bar.highlighted ? " highlighted" : "";
    return (
      `<div class="bar-row${highlight}" title="${bar.classLabel}: ${bar.full}">` +
      `<span class="bar-label">${escapeHtml(bar.wireKey)}</span>` +
      `<span class="bar-track"><span class="bar-fill" style="width:${bar.widthPercent}%"></span></span>` +
      `<span class="bar-value">${bar.display}</span>` +
      `</div>`
    );
  });
  return `<div class="bars">${rows.join("")}</div>`;
}

export function renderRecordRow(row: RecordRow): string {
  const verdict =
    row.correct === null ? "unlabeled" : row.correct ? "correct" : "incorrect";
  return (
    `<article class="record ${verdict}" data-sha="${escapeHtml(row.sha)}">` +
    `<header><code>${escapeHtml(row.sha)}</code> <time>${escapeHtml(row.date)}</time>` +
    `<span class="amount" title="${row.amount.full}">${row.amount.display}</span></header>` +
    `<p>${escapeHtml(row.description)}</p>` +
    `<p class="context">${escapeHtml(row.bank)} / ${escapeHtml(row.industry)}` +
    (row.tags.length ? ` / ${escapeHtml(row.tags.join(", "))}` : "") +
    `</p>` +
    `<p class="labels">predicted <strong>${row.predicted}</strong>` +
    (row.actual !== null ? `, actual <strong>${row.actual}</strong>` : "") +
    ` (${verdict})</p>` +
    renderBars(row.probabilities) +
    `</article>`
  );
}

export function renderClassificationHeader(header: ClassificationHeader): string {
  return (
    `<div class="class-header">` +
    `<h3>${header.classLabel}</h3>` +
    metricSpan("accuracy", header.accuracy) +
    metricSpan("precision", header.precision) +
    metricSpan("sensitivity", header.sensitivity) +
    metricSpan("f-measure", header.fMeasure) +
    `<span class="metric"><label>support</label> ${header.support}</span>` +
    `</div>`
  );
}

export function renderClassificationPanel(panel: ClassificationPanel): string {
  const slice =
    panel.correct === null ? "all" : panel.correct ? "correct only" : "incorrect only";
  const body = panel.emptyMessage
    ? `<p class="empty">${escapeHtml(panel.emptyMessage)}</p>`
    : panel.rows.map(renderRecordRow).join("");
  return (
    `<section class="panel classification">` +
    (panel.header ? renderClassificationHeader(panel.header) : "") +
    `<p class="slice">showing ${slice}</p>` +
    body +
    `</section>`
  );
}

export function renderSearchPanel(panel: SearchPanel): string {
  const group = (title: string, rows: RecordRow[]) =>
    `<div class="search-group"><h4>${title} (${rows.length})</h4>` +
    (rows.length ? rows.map(renderRecordRow).join("") : `<p class="empty">none</p>`) +
    `</div>`;
  return (
    `<section class="panel search">` +
    `<p class="slice">term <code>${escapeHtml(panel.term)}</code> (${panel.match})</p>` +
    group("correctly classified", panel.correct) +
    group("incorrectly classified", panel.incorrect) +
    `</section>`
  );
}

export function renderNeighborsPanel(panel: NeighborsPanel): string {
  const rows = panel.rows.map(
    (row) =>
      `<li><span class="distance" title="${row.distance.full}">${row.distance.display}</span>` +
      renderRecordRow(row) +
      `</li>`,
  );
  return (
    `<section class="panel neighbors">` +
    `<h4>nearest to ${escapeHtml(panel.sha)} (${escapeHtml(panel.groups.join(", ") || "all groups")})</h4>` +
    `<ol>${rows.join("")}</ol>` +
    `</section>`
  );
}

export function renderWhatIfPanel(panel: WhatIfPanel): string {
  const deltas = panel.delta.map(
    (entry) =>
      `<span class="delta" title="${entry.classLabel}: ${entry.full}">` +
      `<label>${escapeHtml(entry.wireKey)}</label> ${entry.display}</span>`,
  );
  return (
    `<section class="panel whatif">` +
    (panel.flipped ? `<p class="flip">classification flipped</p>` : "") +
    (panel.zeroDelta ? `<p class="zero">no overrides applied; delta is zero</p>` : "") +
    (panel.clampNote ? `<p class="clamp">${escapeHtml(panel.clampNote)}</p>` : "") +
    `<div class="side baseline"><h4>baseline: ${panel.baseline.finalLabel}</h4>` +
    renderBars(panel.baseline.bars) +
    `</div>` +
    `<div class="side modified"><h4>modified: ${panel.modified.finalLabel}</h4>` +
    renderBars(panel.modified.bars) +
    `</div>` +
    `<div class="deltas">${deltas.join("")}</div>` +
    `</section>`
  );
}

export function renderVisualizationPanel(panel: VisualizationPanel): string {
  const xs = panel.points.map((point) => point.x);
  const minX = Math.min(...xs, 0);
  const maxX = Math.max(...xs, 1);
  const span = maxX - minX || 1;
  const dots = panel.points.map((point) => {
    const cx = (4 + (92 * (point.x - minX)) / span).toFixed(2);
    const cy = (96 - 92 * point.probability.full).toFixed(2);
    return (
      `<circle cx="${cx}" cy="${cy}" r="1.6" fill="${point.color}" ` +
      `data-sha="${escapeHtml(point.sha)}">` +
      `<title>${escapeHtml(point.sha)}: ${point.outcome}, p=${point.probability.full}</title>` +
      `</circle>`
    );
  });
  const legend = panel.legend.map(
    (entry) =>
      `<span class="legend-entry"><i style="background:${entry.color}"></i>` +
      `${entry.outcome} ${entry.count}</span>`,
  );
  return (
    `<section class="panel visualization">` +
    `<h4>${panel.focusClass} vs ${escapeHtml(panel.axis)} (${panel.total} transactions)</h4>` +
    `<svg viewBox="0 0 100 100" role="img">${dots.join("")}</svg>` +
    `<div class="legend">${legend.join("")}</div>` +
    `</section>`
  );
}

export function renderImportancePanel(panel: ImportancePanel): string {
  const rows = panel.rows.map(
    (row) =>
      `<tr><td>${escapeHtml(row.group)}</td>` +
      `<td title="${row.meanDrop.full}">${row.meanDrop.display}</td>` +
      `<td title="${row.stdDrop.full}">${row.stdDrop.display}</td>` +
      `<td>${row.repeats}</td></tr>`,
  );
  return (
    `<section class="panel importance">` +
    `<h4>permutation importance (${escapeHtml(panel.metric)}, baseline ` +
    `<span title="${panel.baseline.full}">${panel.baseline.display}</span>)</h4>` +
    `<table><thead><tr><th>group</th><th>mean drop</th><th>std</th><th>repeats</th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>` +
    `</section>`
  );
}
