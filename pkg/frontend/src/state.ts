/** View state and its pure transitions.
 *
 * Everything here is derived from server responses plus the annotator's
 * in-flight selection; reloading the page and re-deriving from the
 * server reconstructs the same state (the active match is the first
 * unresolved one, not a client-side bookmark).
 */

import type { CandidateWindowView, MatchView, SessionView } from "./types.js";

export interface Banner {
  kind: "error" | "conflict" | "info";
  text: string;
  /** match position whose pair conflicts, for map highlighting */
  conflictPosition?: number;
}

export interface ViewState {
  session: SessionView;
  activeMatch: number;
  candidates: CandidateWindowView | null;
  selectedCandidate: number | null; // keyframe index in trajectory B
  banner: Banner | null;
}

export function firstUnresolvedMatch(matches: MatchView[]): number {
  const index = matches.findIndex((m) => m.status === "proposed");
  return index === -1 ? 0 : index;
}

export function initialState(session: SessionView): ViewState {
  return {
    session,
    activeMatch: firstUnresolvedMatch(session.matches),
    candidates: null,
    selectedCandidate: null,
    banner: null,
  };
}

export function isReadOnly(state: ViewState): boolean {
  return state.session.status === "finalized";
}

export function withSession(state: ViewState, session: SessionView): ViewState {
  const activeMatch = Math.min(state.activeMatch, session.matches.length - 1);
  return { ...state, session, activeMatch };
}

export function moveActive(state: ViewState, delta: number): ViewState {
  const count = state.session.matches.length;
  if (count === 0) return state;
  const activeMatch = Math.min(count - 1, Math.max(0, state.activeMatch + delta));
  if (activeMatch === state.activeMatch) return state;
  return { ...state, activeMatch, candidates: null, selectedCandidate: null };
}

export function setActive(state: ViewState, position: number): ViewState {
  if (position < 0 || position >= state.session.matches.length) return state;
  return { ...state, activeMatch: position, candidates: null, selectedCandidate: null };
}

export function openCandidates(state: ViewState, window: CandidateWindowView): ViewState {
  return {
    ...state,
    candidates: window,
    selectedCandidate: window.proposed_keyframe_b,
  };
}

export function closeCandidates(state: ViewState): ViewState {
  return { ...state, candidates: null, selectedCandidate: null };
}

export function selectCandidate(state: ViewState, keyframeIndex: number): ViewState {
  if (!state.candidates) return state;
  const known = state.candidates.candidates.some((c) => c.keyframe_index === keyframeIndex);
  if (!known) return state;
  return { ...state, selectedCandidate: keyframeIndex };
}

export function moveSelection(state: ViewState, delta: number): ViewState {
  if (!state.candidates || state.selectedCandidate === null) return state;
  const kfs = state.candidates.candidates.map((c) => c.keyframe_index);
  const current = kfs.indexOf(state.selectedCandidate);
  if (current === -1) return state;
  const next = Math.min(kfs.length - 1, Math.max(0, current + delta));
  return { ...state, selectedCandidate: kfs[next]! };
}

export function withBanner(state: ViewState, banner: Banner | null): ViewState {
  return { ...state, banner };
}

/** The correction the current selection would submit, or null when the
 * panel is closed / the session is read-only. Selecting the proposed
 * keyframe confirms; any other candidate corrects. */
export function pendingCorrection(
  state: ViewState,
): { action: "confirm" | "set"; position: number; keyframe_b?: number } | null {
  if (isReadOnly(state) || !state.candidates || state.selectedCandidate === null) return null;
  const position = state.candidates.match_position;
  const match = state.session.matches[position];
  if (!match) return null;
  if (state.selectedCandidate === match.keyframe_b) {
    return { action: "confirm", position };
  }
  return { action: "set", position, keyframe_b: state.selectedCandidate };
}

export function allResolved(state: ViewState): boolean {
  return state.session.matches.every((m) => m.status !== "proposed");
}
