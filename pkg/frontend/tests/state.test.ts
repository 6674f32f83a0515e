import { describe, expect, it } from "vitest";

import {
  allResolved,
  closeCandidates,
  firstUnresolvedMatch,
  initialState,
  isReadOnly,
  moveActive,
  moveSelection,
  openCandidates,
  pendingCorrection,
  selectCandidate,
} from "../src/state.js";
import type { CandidateWindowView, MatchView, SessionView } from "../src/types.js";

function makeMatch(position: number, status: MatchView["status"] = "proposed"): MatchView {
  return {
    position,
    index_a: position,
    index_b: position,
    keyframe_a: position * 10,
    keyframe_b: position * 12,
    timestamp_a: position * 5,
    timestamp_b: position * 6,
    status,
  };
}

function makeSession(matches: MatchView[], status: SessionView["status"] = "proposed"): SessionView {
  return {
    session_id: "s1",
    scene_id: "scene",
    status,
    version: 1,
    duration_a: 60,
    duration_b: 90,
    trajectory_a: { visit_id: "a", timestamps: [0, 1], positions: [[0, 0], [1, 0]] },
    trajectory_b: { visit_id: "b", timestamps: [0, 1], positions: [[0, 0], [1, 0]] },
    turning_points_a: [],
    turning_points_b: [],
    matches,
    artifacts: [],
  };
}

function makeWindow(position: number, keyframes: number[], proposed: number): CandidateWindowView {
  return {
    match_position: position,
    target_keyframe_a: {
      keyframe_index: 5,
      timestamp: 2.5,
      position: [1, 1],
      image_url: null,
    },
    proposed_keyframe_b: proposed,
    candidates: keyframes.map((k) => ({
      keyframe_index: k,
      timestamp: k / 2,
      position: [k, 0],
      image_url: null,
    })),
  };
}

describe("initial state", () => {
  it("activates the first unresolved match", () => {
    const session = makeSession([
      makeMatch(0, "confirmed"),
      makeMatch(1, "confirmed"),
      makeMatch(2),
      makeMatch(3),
    ]);
    expect(initialState(session).activeMatch).toBe(2);
  });

  it("falls back to the first match when everything is resolved", () => {
    expect(firstUnresolvedMatch([makeMatch(0, "confirmed"), makeMatch(1, "rejected")])).toBe(0);
  });

  it("finalized sessions are read-only", () => {
    const state = initialState(makeSession([makeMatch(0)], "finalized"));
    expect(isReadOnly(state)).toBe(true);
  });
});

describe("navigation", () => {
  it("clamps to the match list bounds", () => {
    const state = initialState(makeSession([makeMatch(0), makeMatch(1), makeMatch(2)]));
    expect(moveActive(state, -5).activeMatch).toBe(0);
    expect(moveActive(moveActive(state, 1), 10).activeMatch).toBe(2);
  });

  it("navigating closes the candidate panel", () => {
    let state = initialState(makeSession([makeMatch(0), makeMatch(1)]));
    state = openCandidates(state, makeWindow(0, [0, 1, 2], 1));
    expect(moveActive(state, 1).candidates).toBeNull();
  });
});

describe("candidate selection", () => {
  it("opens preselecting the proposed keyframe", () => {
    const state = openCandidates(
      initialState(makeSession([makeMatch(0)])),
      makeWindow(0, [10, 11, 12], 11),
    );
    expect(state.selectedCandidate).toBe(11);
  });

  it("moves selection within bounds", () => {
    let state = openCandidates(
      initialState(makeSession([makeMatch(0)])),
      makeWindow(0, [10, 11, 12], 11),
    );
    state = moveSelection(state, 1);
    expect(state.selectedCandidate).toBe(12);
    state = moveSelection(state, 5);
    expect(state.selectedCandidate).toBe(12);
  });

  it("ignores selections outside the window", () => {
    const state = openCandidates(
      initialState(makeSession([makeMatch(0)])),
      makeWindow(0, [10, 11], 10),
    );
    expect(selectCandidate(state, 99).selectedCandidate).toBe(10);
  });
});

describe("pending correction", () => {
  it("selecting the proposed candidate confirms", () => {
    const match = makeMatch(1);
    const state = openCandidates(
      { ...initialState(makeSession([makeMatch(0), match])), activeMatch: 1 },
      makeWindow(1, [match.keyframe_b - 1, match.keyframe_b], match.keyframe_b),
    );
    expect(pendingCorrection(state)).toEqual({ action: "confirm", position: 1 });
  });

  it("selecting another candidate corrects", () => {
    const match = makeMatch(1);
    let state = openCandidates(
      { ...initialState(makeSession([makeMatch(0), match])), activeMatch: 1 },
      makeWindow(1, [match.keyframe_b - 1, match.keyframe_b], match.keyframe_b),
    );
    state = selectCandidate(state, match.keyframe_b - 1);
    expect(pendingCorrection(state)).toEqual({
      action: "set",
      position: 1,
      keyframe_b: match.keyframe_b - 1,
    });
  });

  it("read-only sessions never produce corrections", () => {
    const state = openCandidates(
      initialState(makeSession([makeMatch(0)], "finalized")),
      makeWindow(0, [0, 1], 0),
    );
    expect(pendingCorrection(state)).toBeNull();
  });

  it("closed panel produces no correction", () => {
    const state = closeCandidates(initialState(makeSession([makeMatch(0)])));
    expect(pendingCorrection(state)).toBeNull();
  });
});

describe("resolution tracking", () => {
  it("allResolved requires no proposed matches", () => {
    expect(allResolved(initialState(makeSession([makeMatch(0, "confirmed")])))).toBe(true);
    expect(allResolved(initialState(makeSession([makeMatch(0)])))).toBe(false);
  });
});
