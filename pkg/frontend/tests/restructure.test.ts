import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { renderSideBySide, toSideBySideModel } from "../src/restructure.js";
import type { StructureResponse } from "../src/types.js";

const maskedEr = JSON.parse(
  readFileSync(new URL("../fixtures/masked_er_structure.json", import.meta.url), "utf-8"),
) as StructureResponse;
const fig2 = JSON.parse(
  readFileSync(new URL("../fixtures/fig2_structure.json", import.meta.url), "utf-8"),
) as StructureResponse;

describe("side-by-side review", () => {
  it("raises an expected-result callout for the masked fixture", () => {
    const model = toSideBySideModel("the original draft", maskedEr);
    expect(model.callouts).toContain("expected_result");
    const html = renderSideBySide(model);
    expect(html).toContain('data-section="expected_result"');
    expect(html).toContain("Expected Results is missing");
    expect(html).toContain("missing-callout");
  });

  it("renders no callouts for a complete report", () => {
    const model = toSideBySideModel("draft", fig2);
    expect(model.callouts).toHaveLength(0);
    const html = renderSideBySide(model);
    expect(html).not.toContain("callout-list");
    expect(html).toContain("Print Preview Scaling Issue");
  });

  it("keeps the original draft visible beside the rendering", () => {
    const html = renderSideBySide(toSideBySideModel("my words & draft", fig2));
    expect(html).toContain("my words &amp; draft");
    expect(html).toContain("pane-original");
    expect(html).toContain("pane-rendered");
  });

  it("offers accept and dismiss actions", () => {
    const html = renderSideBySide(toSideBySideModel("x", fig2));
    expect(html).toContain('id="accept-restructure"');
    expect(html).toContain('id="dismiss-restructure"');
  });

  it("surfaces parse errors instead of a broken pane", () => {
    const broken: StructureResponse = {
      report: null,
      rendered: null,
      raw: "I cannot help",
      parse_error: "no JSON object found in generation",
    };
    const html = renderSideBySide(toSideBySideModel("x", broken));
    expect(html).toContain("restructure-error");
    expect(html).not.toContain("accept-restructure");
  });
});
