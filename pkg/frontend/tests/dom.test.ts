// @vitest-environment jsdom
import { describe, expect, it, vi } from "vitest";

import { renderCandidatePanel } from "../src/candidates.js";
import { attachKeyboard, type KeyboardHandlers } from "../src/keyboard.js";
import { renderMap } from "../src/map.js";
import type { CandidateWindowView, SessionView } from "../src/types.js";

function session(overrides: Partial<SessionView> = {}): SessionView {
  return {
    session_id: "s1",
    scene_id: "scene",
    status: "proposed",
    version: 1,
    duration_a: 10,
    duration_b: 10,
    trajectory_a: {
      visit_id: "a",
      timestamps: [0, 1, 2, 3],
      positions: [[0, 0], [1, 0], [2, 0], [2, 1]],
    },
    trajectory_b: {
      visit_id: "b",
      timestamps: [0, 1, 2, 3],
      positions: [[0, 0], [1, 0], [2, 0], [2, 1]],
    },
    turning_points_a: [
      { position: 0, keyframe_index: 0, angle_deg: null, origin: "auto" },
      { position: 1, keyframe_index: 2, angle_deg: 90, origin: "auto" },
      { position: 2, keyframe_index: 3, angle_deg: null, origin: "auto" },
    ],
    turning_points_b: [
      { position: 0, keyframe_index: 0, angle_deg: null, origin: "auto" },
      { position: 1, keyframe_index: 2, angle_deg: 90, origin: "auto" },
      { position: 2, keyframe_index: 3, angle_deg: null, origin: "auto" },
    ],
    matches: [
      {
        position: 0, index_a: 0, index_b: 0, keyframe_a: 0, keyframe_b: 0,
        timestamp_a: 0, timestamp_b: 0, status: "proposed",
      },
      {
        position: 1, index_a: 2, index_b: 2, keyframe_a: 3, keyframe_b: 3,
        timestamp_a: 3, timestamp_b: 3, status: "proposed",
      },
    ],
    artifacts: [],
    ...overrides,
  };
}

describe("map rendering", () => {
  it("draws both trajectories, turning points, and match lines", () => {
    const svg = renderMap(document, session(), 0, null);
    expect(svg.querySelectorAll("polyline").length).toBe(2);
    expect(svg.querySelectorAll("circle").length).toBe(6);
    expect(svg.querySelectorAll("line.match-line").length).toBe(2);
  });

  it("endpoint-only session draws two match lines", () => {
    const svg = renderMap(document, session(), 0, null);
    const lines = svg.querySelectorAll("line.match-line");
    expect(lines.length).toBe(2);
  });

  it("highlights the active match and the conflict pair", () => {
    const svg = renderMap(document, session(), 1, 0);
    const lines = [...svg.querySelectorAll("line.match-line")];
    expect(lines[1]!.getAttribute("class")).toContain("match-active");
    expect(lines[0]!.getAttribute("class")).toContain("match-conflict");
  });

  it("clicking a match line reports its position", () => {
    const onMatchClick = vi.fn();
    const svg = renderMap(document, session(), 0, null, { onMatchClick });
    document.body.appendChild(svg);
    const line = svg.querySelector('line[data-position="1"]')!;
    line.dispatchEvent(new window.MouseEvent("click", { bubbles: true }));
    expect(onMatchClick).toHaveBeenCalledWith(1);
  });
});

describe("candidate panel", () => {
  const window_: CandidateWindowView = {
    match_position: 1,
    target_keyframe_a: {
      keyframe_index: 3,
      timestamp: 3,
      position: [2, 1],
      image_url: null,
    },
    proposed_keyframe_b: 3,
    candidates: [
      { keyframe_index: 2, timestamp: 2, position: [2, 0], image_url: null },
      { keyframe_index: 3, timestamp: 3, position: [2, 1], image_url: null },
    ],
  };

  it("renders cards when no media is configured", () => {
    const panel = renderCandidatePanel(document, window_, 3, false, {});
    expect(panel.querySelectorAll(".candidate-strip .candidate").length).toBe(2);
    expect(panel.querySelectorAll("img").length).toBe(0);
    expect(panel.textContent).toContain("kf 2");
  });

  it("renders lazy thumbnails when media urls exist", () => {
    const withImages: CandidateWindowView = {
      ...window_,
      candidates: window_.candidates.map((c) => ({
        ...c,
        image_url: `/media/scene/b/kf_${c.keyframe_index}.jpg`,
      })),
    };
    const panel = renderCandidatePanel(document, withImages, 3, false, {});
    const imgs = [...panel.querySelectorAll(".candidate-strip img")];
    expect(imgs.length).toBe(2);
    expect((imgs[0] as HTMLImageElement).loading).toBe("lazy");
  });

  it("marks selection and proposal, and reports clicks", () => {
    const onSelect = vi.fn();
    const panel = renderCandidatePanel(document, window_, 2, false, { onSelect });
    const selected = panel.querySelector(".candidate-selected")!;
    expect(selected.getAttribute("data-keyframe")).toBe("2");
    const proposed = panel.querySelector(".candidate-proposed")!;
    expect(proposed.getAttribute("data-keyframe")).toBe("3");
    document.body.appendChild(panel);
    (proposed as HTMLElement).click();
    expect(onSelect).toHaveBeenCalledWith(3);
  });

  it("read-only panel disables confirm and ignores clicks", () => {
    const onSelect = vi.fn();
    const panel = renderCandidatePanel(document, window_, 2, true, { onSelect });
    const button = panel.querySelector(".confirm-button") as HTMLButtonElement;
    expect(button.disabled).toBe(true);
    (panel.querySelector(".candidate-proposed") as HTMLElement).click();
    expect(onSelect).not.toHaveBeenCalled();
  });
});

describe("keyboard review loop", () => {
  function handlers(): KeyboardHandlers & Record<string, ReturnType<typeof vi.fn>> {
    return {
      onNextMatch: vi.fn(),
      onPrevMatch: vi.fn(),
      onOpenCandidates: vi.fn(),
      onNextCandidate: vi.fn(),
      onPrevCandidate: vi.fn(),
      onConfirm: vi.fn(),
      onReject: vi.fn(),
      onEscape: vi.fn(),
      enabled: () => true,
    } as never;
  }

  function press(key: string, target: EventTarget = document) {
    target.dispatchEvent(new window.KeyboardEvent("keydown", { key, bubbles: true }));
  }

  it("navigates matches and candidates", () => {
    const h = handlers();
    const detach = attachKeyboard(document, h);
    press("j");
    press("ArrowUp");
    press("o");
    press("ArrowRight");
    press("h");
    press("Enter");
    press("x");
    press("Escape");
    expect(h.onNextMatch).toHaveBeenCalledTimes(1);
    expect(h.onPrevMatch).toHaveBeenCalledTimes(1);
    expect(h.onOpenCandidates).toHaveBeenCalledTimes(1);
    expect(h.onNextCandidate).toHaveBeenCalledTimes(1);
    expect(h.onPrevCandidate).toHaveBeenCalledTimes(1);
    expect(h.onConfirm).toHaveBeenCalledTimes(1);
    expect(h.onReject).toHaveBeenCalledTimes(1);
    expect(h.onEscape).toHaveBeenCalledTimes(1);
    detach();
    press("j");
    expect(h.onNextMatch).toHaveBeenCalledTimes(1);
  });

  it("ignores keys while typing in inputs", () => {
    const h = handlers();
    attachKeyboard(document, h);
    const input = document.createElement("input");
    document.body.appendChild(input);
    press("j", input);
    expect(h.onNextMatch).not.toHaveBeenCalled();
  });

  it("respects the enabled gate", () => {
    const h = handlers();
    (h as { enabled: () => boolean }).enabled = () => false;
    attachKeyboard(document, h);
    press("j");
    expect(h.onNextMatch).not.toHaveBeenCalled();
  });
});
