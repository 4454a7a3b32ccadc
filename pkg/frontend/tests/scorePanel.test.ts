import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  emptyPanelModel,
  renderScorePanel,
  toScorePanelModel,
} from "../src/scorePanel.js";
import type { ScoreResponse } from "../src/types.js";

const fig2Score = JSON.parse(
  readFileSync(new URL("../fixtures/fig2_score.json", import.meta.url), "utf-8"),
) as ScoreResponse;
const proseScore = JSON.parse(
  readFileSync(new URL("../fixtures/empty_score.json", import.meta.url), "utf-8"),
) as ScoreResponse;

describe("score panel model", () => {
  it("shows the recorded well-structured report at 14+ with an empty checklist", () => {
    const model = toScorePanelModel(fig2Score);
    expect(model.total).toBeGreaterThanOrEqual(14);
    expect(model.maxTotal).toBe(17);
    expect(model.checklist.every((item) => !item.missing)).toBe(true);
  });

  it("derives the displayed total from the per-rule rows of the same response", () => {
    for (const payload of [fig2Score, proseScore]) {
      const model = toScorePanelModel(payload);
      const rowSum = model.rows.reduce((sum, row) => sum + row.awarded, 0);
      expect(model.total).toBe(rowSum);
      expect(model.total).toBe(payload.total); // server agrees
    }
  });

  it("mirrors missing_fields exactly in the checklist", () => {
    const model = toScorePanelModel(proseScore);
    const missing = model.checklist.filter((item) => item.missing).map((i) => i.section);
    expect(missing).toEqual(proseScore.missing_fields);
    expect(missing).toHaveLength(4);
    expect(model.total).toBe(0);
  });

  it("lists all 13 rules", () => {
    expect(toScorePanelModel(fig2Score).rows).toHaveLength(13);
  });

  it("computes percent from total/max", () => {
    const model = toScorePanelModel(fig2Score);
    expect(model.percent).toBeCloseTo(model.total / 17, 12);
  });
});

describe("score panel rendering", () => {
  it("renders the total, every rule row, and checklist marks", () => {
    const html = renderScorePanel(toScorePanelModel(fig2Score));
    expect(html).toContain(`${fig2Score.total}/17`);
    for (const rule of fig2Score.rules) {
      expect(html).toContain(`data-rule="${rule.rule}"`);
    }
    expect(html.match(/check-ok/g)).toHaveLength(4);
  });

  it("marks unmet checklist items for headerless prose", () => {
    const html = renderScorePanel(toScorePanelModel(proseScore));
    expect(html.match(/check-missing/g)).toHaveLength(4);
    expect(html).toContain("0/17");
  });

  it("renders the empty-editor placeholder as 0/17 with all items unmet", () => {
    const html = renderScorePanel(emptyPanelModel());
    expect(html).toContain("0/17");
    expect(html.match(/check-missing/g)).toHaveLength(4);
  });

  it("escapes evidence text", () => {
    const payload: ScoreResponse = {
      ...proseScore,
      rules: [{ rule: "M1", points: 0, max: 1, evidence: "<script>alert(1)</script>" }],
    };
    const html = renderScorePanel(toScorePanelModel(payload));
    expect(html).not.toContain("<script>alert");
  });

  it("shows the stale note while a refresh is pending", () => {
    const html = renderScorePanel(toScorePanelModel(fig2Score), true);
    expect(html).toContain("stale");
  });
});
