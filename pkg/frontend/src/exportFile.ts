// Export the accepted report: the structured JSON exactly as stored, plus
// the rendered template text.

import type { DraftState } from "./state.js";

export interface ExportBundle {
  jsonName: string;
  jsonContent: string;
  textName: string;
  textContent: string;
}

export function buildExportBundle(
  state: DraftState,
  now: () => Date = () => new Date(),
): ExportBundle | null {
  if (!state.lastStructuredJson || !state.lastStructure?.rendered) return null;
  const stamp = now()
    .toISOString()
    .replace(/[:.]/g, "-")
    .replace("T", "-")
    .slice(0, 19);
  return {
    jsonName: `report-${stamp}.json`,
    jsonContent: state.lastStructuredJson,
    textName: `report-${stamp}.txt`,
    textContent: state.lastStructure.rendered,
  };
}

export function downloadBundle(bundle: ExportBundle, doc: Document = document): void {
  for (const [name, content, type] of [
    [bundle.jsonName, bundle.jsonContent, "application/json"],
    [bundle.textName, bundle.textContent, "text/plain"],
  ] as const) {
    const blob = new Blob([content], { type });
    const url = URL.createObjectURL(blob);
    const anchor = doc.createElement("a");
    anchor.href = url;
    anchor.download = name;
    doc.body.appendChild(anchor);
    anchor.click();
    anchor.remove();
    URL.revokeObjectURL(url);
  }
}
