// Draft state: editor text, last score, last structured result, busy flags.
// Responses are applied in request order; stale ones are discarded by
// sequence number. Accepting a restructure keeps a single-step undo.

import type { ScoreResponse, StructureResponse } from "./types.js";

export interface DraftState {
  text: string;
  lastScore: ScoreResponse | null;
  scoreStale: boolean;
  lastStructure: StructureResponse | null;
  lastStructuredJson: string | null; // exact bytes offered by export
  busy: boolean;
  offline: boolean;
  undoText: string | null;
}

export function initialState(): DraftState {
  return {
    text: "",
    lastScore: null,
    scoreStale: false,
    lastStructure: null,
    lastStructuredJson: null,
    busy: false,
    offline: false,
    undoText: null,
  };
}

export class DraftStore {
  private state: DraftState = initialState();
  private scoreSeq = 0;
  private scoreApplied = 0;
  private structureSeq = 0;
  private structureApplied = 0;
  private listeners: Array<(state: DraftState) => void> = [];

  get current(): DraftState {
    return this.state;
  }

  subscribe(listener: (state: DraftState) => void): void {
    this.listeners.push(listener);
  }

  private commit(patch: Partial<DraftState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  edit(text: string): void {
    this.commit({ text, scoreStale: true });
  }

  nextScoreRequest(): number {
    return ++this.scoreSeq;
  }

  applyScore(seq: number, score: ScoreResponse): boolean {
    if (seq <= this.scoreApplied) return false; // stale response
    this.scoreApplied = seq;
    const isLatest = seq === this.scoreSeq;
    this.commit({ lastScore: score, scoreStale: !isLatest, offline: false });
    return true;
  }

  scoreFailed(offline: boolean): void {
    // last good panel is retained; only the banner state changes
    this.commit({ offline });
  }

  nextStructureRequest(): number {
    this.commit({ busy: true });
    return ++this.structureSeq;
  }

  applyStructure(seq: number, response: StructureResponse): boolean {
    if (seq <= this.structureApplied) return false;
    this.structureApplied = seq;
    this.commit({
      busy: seq !== this.structureSeq,
      lastStructure: response,
      lastStructuredJson: response.report
        ? JSON.stringify(response.report, null, 2)
        : this.state.lastStructuredJson,
      offline: false,
    });
    return true;
  }

  structureFailed(): void {
    this.commit({ busy: false });
  }

  acceptRestructure(): boolean {
    const rendered = this.state.lastStructure?.rendered;
    if (!rendered) return false;
    this.commit({ undoText: this.state.text, text: rendered, scoreStale: true });
    return true;
  }

  dismissRestructure(): void {
    this.commit({ lastStructure: null });
  }

  undo(): boolean {
    if (this.state.undoText === null) return false;
    this.commit({ text: this.state.undoText, undoText: null, scoreStale: true });
    return true;
  }
}
