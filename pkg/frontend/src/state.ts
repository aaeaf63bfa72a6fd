/** Planner state transitions: pure functions over PlannerState. */

import type { Bounds, HistoryEntry, PlannerState, PredictResponse } from './types.js';

export function initialState(): PlannerState {
  return {
    bounds: null,
    scene: null,
    tx: [0, 0, 10],
    patternId: 0,
    height: 1.5,
    resolution: 128,
    showProbes: false,
    latestRequestSeq: 0,
    map: null,
    history: [],
    error: null,
  };
}

export function clampToBounds(pos: [number, number, number], bounds: Bounds):
    [number, number, number] {
  return [
    Math.min(bounds.max[0], Math.max(bounds.min[0], pos[0])),
    Math.min(bounds.max[1], Math.max(bounds.min[1], pos[1])),
    Math.min(bounds.max[2], Math.max(bounds.min[2], pos[2])),
  ];
}

export function placeTransmitter(state: PlannerState, pos: [number, number, number]):
    PlannerState {
  const tx = state.bounds ? clampToBounds(pos, state.bounds) : pos;
  return { ...state, tx };
}

export function issueRequest(state: PlannerState): [PlannerState, number] {
  const seq = state.latestRequestSeq + 1;
  return [{ ...state, latestRequestSeq: seq }, seq];
}

/** Apply a map response; stale responses (superseded sequence) are dropped,
 * so the rendered map always carries the metadata of its own request. */
export function applyPrediction(state: PlannerState, seq: number,
                                resp: PredictResponse): PlannerState {
  if (seq !== state.latestRequestSeq) {
    return state;
  }
  return {
    ...state,
    error: null,
    map: {
      seq,
      resolution: resp.resolution,
      values: resp.values_norm,
      pMinDb: resp.p_min_db,
      pMaxDb: resp.p_max_db,
    },
  };
}

export function applyError(state: PlannerState, message: string): PlannerState {
  return { ...state, error: message };
}

/** History is append-only within a session. */
export function appendHistory(state: PlannerState, entry: HistoryEntry): PlannerState {
  return { ...state, history: [...state.history, entry] };
}
