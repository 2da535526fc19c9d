/** Client-side mirror of the server session. Never the source of truth:
 *  every field is copied verbatim from the latest server response, and the
 *  revision counter rejects out-of-order updates. */

import type { PathStep, SessionState } from "./types.js";

export type ActiveView = "search" | "output-adjust" | "interpolate";

export interface ViewState {
  sessionId: string | null;
  revision: number;
  mixture: number[];
  recordId: number | null;
  adjustments: Record<string, number>;
  activeView: ActiveView;
  hoveredId: number | null;
  selectedId: number | null;
  currentPath: PathStep[] | null;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    revision: -1,
    mixture: [],
    recordId: null,
    adjustments: {},
    activeView: "search",
    hoveredId: null,
    selectedId: null,
    currentPath: null,
  };
}

/** Apply a server state snapshot; stale revisions are ignored. */
export function applyServerState(view: ViewState, state: SessionState): boolean {
  if (state.revision <= view.revision) return false;
  view.sessionId = state.session_id;
  view.revision = state.revision;
  view.mixture = state.mixture;
  view.recordId = state.record_id;
  view.adjustments = state.adjustments;
  view.selectedId = state.record_id;
  return true;
}

export function applyMixture(view: ViewState, mixture: number[], revision: number): boolean {
  if (revision <= view.revision) return false;
  view.mixture = mixture;
  view.revision = revision;
  view.recordId = null; // an input adjustment detaches the anchor record
  return true;
}
