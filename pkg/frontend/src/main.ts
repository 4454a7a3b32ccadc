// Browser wiring: debounced live scoring, restructure review, export.

import { ReportsmithClient, ApiError } from "./api.js";
import { debounce } from "./debounce.js";
import { buildExportBundle, downloadBundle } from "./exportFile.js";
import { renderSideBySide, toSideBySideModel } from "./restructure.js";
import { emptyPanelModel, renderScorePanel, toScorePanelModel } from "./scorePanel.js";
import { DraftStore } from "./state.js";

const SCORE_DEBOUNCE_MS = 400;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function boot(baseUrl = ""): void {
  const client = new ReportsmithClient(baseUrl);
  const store = new DraftStore();

  const editor = el<HTMLTextAreaElement>("editor");
  const panel = el<HTMLDivElement>("score-panel");
  const review = el<HTMLDivElement>("review");
  const banner = el<HTMLDivElement>("offline-banner");
  const backendSelect = el<HTMLSelectElement>("backend");
  const shotsSelect = el<HTMLSelectElement>("shots");

  let scoreInFlight = false;
  let scoreQueued = false;

  const requestScore = async () => {
    const text = store.current.text;
    if (!text.trim()) {
      panel.innerHTML = renderScorePanel(emptyPanelModel());
      return;
    }
    if (scoreInFlight) {
      scoreQueued = true; // coalesce: at most one request in flight
      return;
    }
    scoreInFlight = true;
    const seq = store.nextScoreRequest();
    try {
      const score = await client.score(text);
      store.applyScore(seq, score);
    } catch (err) {
      store.scoreFailed(err instanceof ApiError && err.status === null);
    } finally {
      scoreInFlight = false;
      if (scoreQueued) {
        scoreQueued = false;
        void requestScore();
      }
    }
  };
  const debouncedScore = debounce(() => void requestScore(), SCORE_DEBOUNCE_MS);

  editor.addEventListener("input", () => {
    store.edit(editor.value);
    debouncedScore();
  });

  el<HTMLButtonElement>("restructure").addEventListener("click", async () => {
    const seq = store.nextStructureRequest();
    try {
      const response = await client.structure(
        store.current.text,
        backendSelect.value || undefined,
        Number(shotsSelect.value) || 0,
      );
      store.applyStructure(seq, response);
    } catch (err) {
      store.structureFailed();
      review.innerHTML = `<div class="restructure-error">${
        err instanceof ApiError && err.status !== null
          ? `Backend failed (HTTP ${err.status}). Retry?`
          : "Network failure. Retry?"
      }</div>`;
      return;
    }
  });

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    const bundle = buildExportBundle(store.current);
    if (bundle) downloadBundle(bundle);
  });

  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    if (store.undo()) {
      editor.value = store.current.text;
      debouncedScore.flush();
      void requestScore();
    }
  });

  review.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "accept-restructure") {
      if (store.acceptRestructure()) {
        editor.value = store.current.text;
        review.innerHTML = "";
        void requestScore();
      }
    } else if (target.id === "dismiss-restructure") {
      store.dismissRestructure();
      review.innerHTML = "";
    }
  });

  store.subscribe((state) => {
    if (state.lastScore) {
      panel.innerHTML = renderScorePanel(toScorePanelModel(state.lastScore), state.scoreStale);
    }
    banner.style.display = state.offline ? "block" : "none";
    el<HTMLButtonElement>("restructure").disabled = state.busy;
    el<HTMLButtonElement>("export").disabled = !state.lastStructuredJson;
    el<HTMLButtonElement>("undo").disabled = state.undoText === null;
    if (state.lastStructure) {
      review.innerHTML = renderSideBySide(toSideBySideModel(state.text, state.lastStructure));
    }
  });

  panel.innerHTML = renderScorePanel(emptyPanelModel());
  void client.health().then(
    (health) => {
      for (const name of health.backends) {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = name;
        backendSelect.appendChild(option);
      }
    },
    () => store.scoreFailed(true),
  );
}

if (typeof document !== "undefined" && document.getElementById("editor")) {
  // same-origin by default; ?api=http://host:port points at a remote service
  const apiOrigin = new URLSearchParams(window.location.search).get("api") ?? "";
  boot(apiOrigin);
}
