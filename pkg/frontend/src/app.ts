/** Dashboard shell: wires the API client to the panel renderers.
 *
 * Single page, three discovery branches as tabs. Review starts from
 * the misclassification overview, drills into a class or search hit,
 * then probes the suspect row with neighbors and what-if overrides.
 */

import { ApiError, WorkbenchClient } from "./api.js";
import { ProbeHistory } from "./history.js";
import {
  buildClassificationPanel,
  buildImportancePanel,
  buildNeighborsPanel,
  buildOverviewPanel,
  buildSearchPanel,
  buildVisualizationPanel,
  buildWhatIfPanel,
  classOptions,
  withCorrectness,
  type BranchSelection,
} from "./panels.js";
import {
  escapeHtml,
  renderClassificationHeader,
  renderClassificationPanel,
  renderImportancePanel,
  renderNeighborsPanel,
  renderSearchPanel,
  renderVisualizationPanel,
  renderWhatIfPanel,
} from "./render.js";
import type { ClassLabel, WhatIfOverrides } from "./types.js";

// default to the workbench's usual address; override with ?api=http://host:port
const apiBase =
  typeof location !== "undefined"
    ? (new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000")
    : "";
const client = new WorkbenchClient(apiBase);
const history = new ProbeHistory();

let selection: BranchSelection = { classLabel: "FUNDING", correct: null };

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function showError(target: HTMLElement, error: unknown): void {
  const message =
    error instanceof ApiError ? error.detail : error instanceof Error ? error.message : String(error);
  target.innerHTML = `<p class="error">${escapeHtml(message)}</p>`;
}

async function refreshOverview(): Promise<void> {
  const target = el("overview");
  try {
    const overview = buildOverviewPanel(await client.metrics());
    target.innerHTML =
      `<p>model <code>${escapeHtml(overview.modelId)}</code></p>` +
      `<p><span title="${overview.overallAccuracy.full}">accuracy ${overview.overallAccuracy.display}</span> ` +
      `<span title="${overview.cohenKappa.full}">kappa ${overview.cohenKappa.display}</span> ` +
      `<span>${overview.correctShas.length} correct / ${overview.incorrectShas.length} incorrect</span></p>` +
      overview.classes.map(renderClassificationHeader).join("");
  } catch (error) {
    showError(target, error);
  }
}

async function refreshClassification(): Promise<void> {
  const target = el("classification");
  try {
    const response = await client.transactions(
      selection.classLabel,
      selection.correct === null ? {} : { correct: selection.correct },
    );
    target.innerHTML = renderClassificationPanel(buildClassificationPanel(response));
  } catch (error) {
    showError(target, error);
  }
}

async function runSearch(term: string, match: "contains" | "exact"): Promise<void> {
  const target = el("search-results");
  try {
    const response = await client.search(term, match);
    target.innerHTML = renderSearchPanel(buildSearchPanel(response));
  } catch (error) {
    showError(target, error);
  }
}

async function refreshVisualization(label: ClassLabel, axis: string): Promise<void> {
  const target = el("visualization");
  try {
    const response = await client.visualization(label, axis);
    target.innerHTML = renderVisualizationPanel(buildVisualizationPanel(response));
  } catch (error) {
    showError(target, error);
  }
}

async function refreshImportance(): Promise<void> {
  const target = el("importance");
  try {
    target.innerHTML = renderImportancePanel(buildImportancePanel(await client.importance()));
  } catch (error) {
    showError(target, error);
  }
}

async function inspect(sha: string): Promise<void> {
  const target = el("drilldown");
  try {
    const response = await client.neighbors(sha, { k: 5 });
    target.innerHTML =
      renderNeighborsPanel(buildNeighborsPanel(response)) +
      `<p class="hint">probing <code>${escapeHtml(sha)}</code>; adjust fields below and re-run</p>`;
    (el("whatif-sha") as HTMLInputElement).value = sha;
  } catch (error) {
    showError(target, error);
  }
}

function renderHistory(): string {
  const entries = history
    .list()
    .map(
      (probe, index) =>
        `<li>#${index + 1} <code>${escapeHtml(probe.sha)}</code> ` +
        `${escapeHtml(JSON.stringify(probe.overrides))} ` +
        `${probe.baseline.final} to ${probe.modified.final}</li>`,
    );
  return `<ol class="history">${entries.join("")}</ol>`;
}

async function runWhatIf(): Promise<void> {
  const target = el("whatif");
  const sha = (el("whatif-sha") as HTMLInputElement).value.trim();
  if (!sha) {
    target.innerHTML = `<p class="error">pick a transaction first</p>`;
    return;
  }
  const overrides: WhatIfOverrides = {};
  const description = (el("whatif-description") as HTMLInputElement).value;
  const amount = (el("whatif-amount") as HTMLInputElement).value;
  const bank = (el("whatif-bank") as HTMLInputElement).value;
  const industry = (el("whatif-industry") as HTMLInputElement).value;
  if (description) overrides.description = description;
  if (amount) overrides.amount = Number(amount);
  if (bank) overrides.bank = bank;
  if (industry) overrides.industry = industry;
  try {
    const response = await client.whatIf(sha, overrides);
    history.push(response);
    target.innerHTML = renderWhatIfPanel(buildWhatIfPanel(response)) + renderHistory();
  } catch (error) {
    // API errors (unknown field, bad sha) render inline, verbatim
    showError(target, error);
  }
}

function activateTab(name: string): void {
  for (const tab of document.querySelectorAll<HTMLElement>("[data-tab]")) {
    tab.classList.toggle("active", tab.dataset.tab === name);
  }
  for (const pane of document.querySelectorAll<HTMLElement>("[data-pane]")) {
    pane.hidden = pane.dataset.pane !== name;
  }
}

export function boot(): void {
  const classSelect = el("class-select") as HTMLSelectElement;
  for (const label of classOptions()) {
    const option = document.createElement("option");
    option.value = label;
    option.textContent = label;
    classSelect.append(option);
  }

  classSelect.addEventListener("change", () => {
    selection = { classLabel: classSelect.value as ClassLabel, correct: selection.correct };
    void refreshClassification();
  });
  el("correct-toggle").addEventListener("change", (event) => {
    const value = (event.target as HTMLSelectElement).value;
    selection = withCorrectness(selection, value === "all" ? null : value === "true");
    void refreshClassification();
  });

  el("search-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const term = (el("search-term") as HTMLInputElement).value;
    const match = (el("search-match") as HTMLSelectElement).value as "contains" | "exact";
    if (term.trim() === "") {
      el("search-results").innerHTML = `<p class="error">enter a search term</p>`;
      return;
    }
    void runSearch(term, match);
  });

  el("viz-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const label = (el("viz-class") as HTMLSelectElement).value as ClassLabel;
    const axis = (el("viz-axis") as HTMLSelectElement).value;
    void refreshVisualization(label, axis);
  });

  el("whatif-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void runWhatIf();
  });

  document.body.addEventListener("click", (event) => {
    const record = (event.target as HTMLElement).closest<HTMLElement>("[data-sha]");
    if (record?.dataset.sha) void inspect(record.dataset.sha);
  });

  for (const tab of document.querySelectorAll<HTMLElement>("[data-tab]")) {
    tab.addEventListener("click", () => activateTab(tab.dataset.tab ?? ""));
  }

  activateTab("classification");
  void refreshOverview();
  void refreshClassification();
  void refreshImportance();
}

if (typeof document !== "undefined" && document.getElementById("overview")) {
  boot();
}
