// Side-by-side review of the original draft vs the restructured report,
// with <MISSING> callouts for every flagged section.

import { escapeHtml } from "./scorePanel.js";
import type { BodySection, StructureResponse } from "./types.js";
import { SECTION_LABELS } from "./types.js";

export const MISSING_MARKER = "<MISSING>";

export interface SideBySideModel {
  original: string;
  rendered: string;
  callouts: BodySection[];
  parseError: string | null;
}

export function toSideBySideModel(
  original: string,
  response: StructureResponse,
): SideBySideModel {
  return {
    original,
    rendered: response.rendered ?? "",
    callouts: (response.report?.missing_fields ?? []) as BodySection[],
    parseError: response.parse_error,
  };
}

function renderedHtml(model: SideBySideModel): string {
  return escapeHtml(model.rendered)
    .split("\n")
    .map((line) =>
      line === escapeHtml(MISSING_MARKER)
        ? `<span class="missing-callout">${escapeHtml(MISSING_MARKER)}</span>`
        : line,
    )
    .join("\n");
}

export function renderSideBySide(model: SideBySideModel): string {
  if (model.parseError !== null) {
    return `<div class="restructure-error">The backend returned nothing usable: ${escapeHtml(
      model.parseError,
    )}</div>`;
  }
  const callouts = model.callouts
    .map(
      (section) =>
        `<li class="callout" data-section="${section}">${escapeHtml(
          SECTION_LABELS[section],
        )} is missing</li>`,
    )
    .join("");
  return `
    <div class="side-by-side">
      <div class="pane pane-original">
        <h3>Your draft</h3>
        <pre>${escapeHtml(model.original)}</pre>
      </div>
      <div class="pane pane-rendered">
        <h3>Structured</h3>
        <pre>${renderedHtml(model)}</pre>
      </div>
    </div>
    ${callouts ? `<ul class="callout-list">${callouts}</ul>` : ""}
    <div class="review-actions">
      <button id="accept-restructure">Accept</button>
      <button id="dismiss-restructure">Dismiss</button>
    </div>`;
}
