import { describe, expect, it } from "vitest";
import {
  buildClassificationPanel,
  buildImportancePanel,
  buildVisualizationPanel,
  buildWhatIfPanel,
  classificationHeader,
  recordRow,
} from "../src/panels.js";
import {
  escapeHtml,
  renderClassificationHeader,
  renderClassificationPanel,
  renderImportancePanel,
  renderRecordRow,
  renderVisualizationPanel,
  renderWhatIfPanel,
} from "../src/render.js";
import type {
  ClassMetricsResponse,
  ImportanceResponse,
  RecordView,
  TransactionsResponse,
  VisualizationResponse,
  WhatIfResponse,
} from "../src/types.js";
import { loadFixture } from "./helpers.js";

const hostileRecord: RecordView = {
  sha: "TX_EVIL",
  date: "2020-01-01T00:00:00",
  amount: 10,
  description: `<script>alert("x")</script>`,
  customer_id: 1,
  bank: "A&B <Bank>",
  industry: "Retail",
  enrichment_tags: {},
  predicted: "OTHER",
  actual: null,
  correct: null,
  probabilities: {
    funding: 0.2,
    income_invoice: 0.2,
    income_cash: 0.2,
    income_cheque: 0.15,
    other: 0.25,
  },
};

describe("renderers", () => {
  it("escapes markup lurking in record fields", () => {
    const html = renderRecordRow(recordRow(hostileRecord));
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain("A&amp;B &lt;Bank&gt;");
    expect(escapeHtml(`"quoted" & 'single'`)).toBe("&quot;quoted&quot; &amp; &#39;single&#39;");
  });

  it("puts full precision on tooltips", () => {
    const fixture = loadFixture<ImportanceResponse>("importance");
    const html = renderImportancePanel(buildImportancePanel(fixture));
    expect(html).toContain(`title="${fixture.baseline}"`);
    const text = fixture.groups.find((group) => group.group === "text");
    expect(text).toBeDefined();
    if (text) expect(html).toContain(`title="${text.mean_drop}"`);
  });

  it("marks undefined metrics as n/a", () => {
    const single = loadFixture<ClassMetricsResponse>("metrics_income_cash");
    const html = renderClassificationHeader(classificationHeader(single.class));
    expect(html).toContain("n/a");
    expect(html).toContain(`title="sensitivity: ${single.class.recall}"`);
  });

  it("renders the empty slice message", () => {
    const panel = buildClassificationPanel(
      loadFixture<TransactionsResponse>("transactions_income_cash_correct"),
    );
    const html = renderClassificationPanel(panel);
    expect(html).toContain("no INCOME_CASH predictions in this slice");
  });

  it("flags flips, zero deltas and clamps", () => {
    const flip = renderWhatIfPanel(buildWhatIfPanel(loadFixture<WhatIfResponse>("whatif_flip")));
    expect(flip).toContain("classification flipped");
    expect(flip).toContain("clamp");
    const empty = renderWhatIfPanel(buildWhatIfPanel(loadFixture<WhatIfResponse>("whatif_empty")));
    expect(empty).toContain("delta is zero");
    expect(empty).not.toContain("classification flipped");
  });

  it("draws one dot per point and a legend with counts", () => {
    const fixture = loadFixture<VisualizationResponse>("visualization_funding_amount");
    const html = renderVisualizationPanel(buildVisualizationPanel(fixture));
    expect(html.match(/<circle /g)).toHaveLength(fixture.points.length);
    expect(html).toContain("FN 1");
    expect(html).toContain("TP 3");
  });
});
