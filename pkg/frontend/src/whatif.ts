// What-if panel model: gather per-candidate predictions and lay them out
// side by side, fastest first, with infeasible candidates greyed out.

import type { OpsClient } from "./client.js";
import type { StateDoc, WhatifDoc } from "./types.js";

export interface CandidateOutcome {
  watercraftId: string | null; // null = planner's own choice
  feasible: boolean;
  reason: string | null;
  result: WhatifDoc | null;
}

export async function exploreCandidates(
  client: OpsClient,
  requestId: string,
  candidateWatercraft: (string | null)[],
): Promise<CandidateOutcome[]> {
  const outcomes: CandidateOutcome[] = [];
  for (const wid of candidateWatercraft) {
    try {
      const result = await client.whatif(requestId, wid);
      outcomes.push({ watercraftId: wid, feasible: true, reason: null, result });
    } catch (err: any) {
      outcomes.push({
        watercraftId: wid,
        feasible: false,
        reason: err.detail ?? String(err),
        result: null,
      });
    }
  }
  return sortOutcomes(outcomes);
}

export function sortOutcomes(outcomes: CandidateOutcome[]): CandidateOutcome[] {
  return [...outcomes].sort((a, b) => {
    const ta = a.result?.total_time_s ?? Number.POSITIVE_INFINITY;
    const tb = b.result?.total_time_s ?? Number.POSITIVE_INFINITY;
    return ta - tb;
  });
}

export function candidateWatercraftIds(state: StateDoc): string[] {
  return state.watercraft.map((w) => w.id);
}

// Plain-text timeline rows for one candidate column.
export function timelineRows(result: WhatifDoc): string[] {
  return result.timeline.map(([kind, t]) => `${t.toFixed(1).padStart(9)}s  ${kind}`);
}
