import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ApiError, ReportsmithClient } from "../src/api.js";

const fig2Score = readFileSync(
  new URL("../fixtures/fig2_score.json", import.meta.url),
  "utf-8",
);

function jsonResponse(body: string, status = 200): Response {
  return new Response(body, {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("ReportsmithClient", () => {
  it("posts the text and parses the score payload", async () => {
    const seen: Array<{ url: string; body: unknown }> = [];
    const client = new ReportsmithClient("http://svc", async (url, init) => {
      seen.push({ url, body: JSON.parse(String(init?.body)) });
      return jsonResponse(fig2Score);
    });
    const score = await client.score("some text");
    expect(seen[0].url).toBe("http://svc/api/score");
    expect(seen[0].body).toEqual({ text: "some text" });
    expect(score.total).toBeGreaterThanOrEqual(14);
    expect(score.rules).toHaveLength(13);
  });

  it("sends backend and shots only when given", async () => {
    const bodies: unknown[] = [];
    const client = new ReportsmithClient("", async (_url, init) => {
      bodies.push(JSON.parse(String(init?.body)));
      return jsonResponse('{"report": null, "rendered": null, "raw": "", "parse_error": "x"}');
    });
    await client.structure("t");
    await client.structure("t", "mock", 3);
    expect(bodies[0]).toEqual({ text: "t" });
    expect(bodies[1]).toEqual({ text: "t", backend: "mock", shots: 3 });
  });

  it("maps HTTP errors to ApiError with the status", async () => {
    const client = new ReportsmithClient("", async () =>
      jsonResponse('{"detail": "bad"}', 400),
    );
    await expect(client.score("x")).rejects.toMatchObject({ status: 400 });
  });

  it("maps network failures to ApiError with null status", async () => {
    const client = new ReportsmithClient("", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.score("x").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBeNull();
  });

  it("fetches health", async () => {
    const client = new ReportsmithClient("", async () =>
      jsonResponse('{"status": "ok", "backends": ["mock"]}'),
    );
    const health = await client.health();
    expect(health.backends).toContain("mock");
  });
});
