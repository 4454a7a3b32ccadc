// Score panel model + renderer. The displayed total is derived from the
// per-rule rows of the same response, so total/row parity holds by
// construction.

import type { BodySection, ScoreResponse } from "./types.js";
import { BODY_SECTIONS, SECTION_LABELS } from "./types.js";

export interface RuleRow {
  rule: string;
  awarded: number;
  max: number;
  evidence: string;
}

export interface ChecklistItem {
  section: BodySection;
  label: string;
  missing: boolean;
}

export interface ScorePanelModel {
  rows: RuleRow[];
  total: number;
  maxTotal: number;
  percent: number;
  checklist: ChecklistItem[];
}

export function toScorePanelModel(score: ScoreResponse): ScorePanelModel {
  const rows = score.rules.map((r) => ({
    rule: r.rule,
    awarded: r.points,
    max: r.max,
    evidence: r.evidence,
  }));
  const total = rows.reduce((sum, row) => sum + row.awarded, 0);
  const maxTotal = score.max_total;
  return {
    rows,
    total,
    maxTotal,
    percent: maxTotal > 0 ? total / maxTotal : 0,
    checklist: BODY_SECTIONS.map((section) => ({
      section,
      label: SECTION_LABELS[section],
      missing: score.missing_fields.includes(section),
    })),
  };
}

export function emptyPanelModel(): ScorePanelModel {
  return {
    rows: [],
    total: 0,
    maxTotal: 17,
    percent: 0,
    checklist: BODY_SECTIONS.map((section) => ({
      section,
      label: SECTION_LABELS[section],
      missing: true,
    })),
  };
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderScorePanel(model: ScorePanelModel, stale = false): string {
  const percent = Math.round(model.percent * 100);
  const rows = model.rows
    .map(
      (row) => `
      <li class="rule-row" data-rule="${escapeHtml(row.rule)}">
        <span class="rule-id">${escapeHtml(row.rule)}</span>
        <span class="rule-bar"><span class="rule-fill" style="width:${
          row.max > 0 ? (100 * row.awarded) / row.max : 0
        }%"></span></span>
        <span class="rule-points">${row.awarded}/${row.max}</span>
        <span class="rule-evidence">${escapeHtml(row.evidence)}</span>
      </li>`,
    )
    .join("");
  const checklist = model.checklist
    .map(
      (item) => `
      <li class="check-item ${item.missing ? "check-missing" : "check-ok"}" data-section="${
        item.section
      }">
        <span class="check-mark">${item.missing ? "✗" : "✓"}</span>
        ${escapeHtml(item.label)}
      </li>`,
    )
    .join("");
  return `
    <div class="score-summary${stale ? " stale" : ""}">
      <span class="score-total">${model.total}/${model.maxTotal}</span>
      <span class="score-percent">${percent}%</span>
      ${stale ? '<span class="score-stale-note">updating…</span>' : ""}
    </div>
    <ul class="rule-list">${rows}</ul>
    <h3>Template checklist</h3>
    <ul class="checklist">${checklist}</ul>`;
}
