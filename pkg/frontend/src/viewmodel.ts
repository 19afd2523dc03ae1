// Client-side state: the latest server revision plus UI-only selections.
// The server is the single source of truth; nothing here simulates dynamics.

import type { RecommendationDoc, StateDoc, WhatifDoc } from "./types.js";

export interface Selection {
  requestId: string | null;
  forcedAxp: string | null;
  showZones: boolean;
  showTracks: boolean;
}

export class ViewModel {
  state: StateDoc | null = null;
  // Raw JSON of the last /recommend response; rendered verbatim, never
  // re-ranked or recomputed client-side.
  recommendationRaw: string | null = null;
  whatifResults: WhatifDoc[] = [];
  selection: Selection = {
    requestId: null,
    forcedAxp: null,
    showZones: false,
    showTracks: true,
  };

  // Returns true when the document was applied; stale revisions (older than
  // the one on screen) are discarded.
  applyState(doc: StateDoc): boolean {
    if (this.state && doc.revision < this.state.revision) {
      return false;
    }
    this.state = doc;
    return true;
  }

  setRecommendation(doc: RecommendationDoc, rawJson: string): void {
    this.recommendationRaw = rawJson;
  }

  get recommendation(): RecommendationDoc | null {
    return this.recommendationRaw ? JSON.parse(this.recommendationRaw) : null;
  }

  selectRequest(id: string | null): void {
    this.selection.requestId = id;
    this.selection.forcedAxp = null;
    this.recommendationRaw = null;
    this.whatifResults = [];
  }

  addWhatif(result: WhatifDoc): void {
    this.whatifResults.push(result);
  }

  // Candidates sorted fastest-first; infeasible entries come last.
  sortedWhatifs(): WhatifDoc[] {
    return [...this.whatifResults].sort((a, b) => {
      const ta = a.total_time_s ?? Number.POSITIVE_INFINITY;
      const tb = b.total_time_s ?? Number.POSITIVE_INFINITY;
      return ta - tb;
    });
  }

  aircraftStatus(id: string): string | null {
    const a = this.state?.aircraft.find((x) => x.id === id);
    return a ? a.status : null;
  }
}
