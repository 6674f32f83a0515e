/** Candidate review panel: the trajectory-A turning point beside a
 * scrollable strip of trajectory-B candidate keyframes.
 *
 * With a media root configured the service hands out image URLs under
 * /media/ and the strip shows lazily loaded thumbnails with
 * click-to-zoom; without one (synthetic data) each candidate renders as
 * a position/timestamp card so the review loop works without images. */

import type { CandidateView, CandidateWindowView } from "./types.js";

export interface CandidatePanelCallbacks {
  onSelect?: (keyframeIndex: number) => void;
  onConfirm?: () => void;
}

function candidateCard(
  doc: Document,
  candidate: CandidateView,
  selected: boolean,
  proposed: boolean,
  callbacks: CandidatePanelCallbacks,
): HTMLElement {
  const card = doc.createElement("div");
  const classes = ["candidate"];
  if (selected) classes.push("candidate-selected");
  if (proposed) classes.push("candidate-proposed");
  card.className = classes.join(" ");
  card.dataset.keyframe = String(candidate.keyframe_index);

  if (candidate.image_url) {
    const img = doc.createElement("img");
    img.src = candidate.image_url;
    img.loading = "lazy";
    img.alt = `keyframe ${candidate.keyframe_index}`;
    img.addEventListener("click", (event) => {
      event.stopPropagation();
      img.classList.toggle("zoomed");
    });
    card.appendChild(img);
  }
  const label = doc.createElement("div");
  label.className = "candidate-label";
  const [x, y] = candidate.position;
  label.textContent =
    `kf ${candidate.keyframe_index} · t=${candidate.timestamp.toFixed(2)}s · ` +
    `(${x.toFixed(2)}, ${y.toFixed(2)})`;
  card.appendChild(label);

  card.addEventListener("click", () => callbacks.onSelect?.(candidate.keyframe_index));
  card.addEventListener("dblclick", () => {
    callbacks.onSelect?.(candidate.keyframe_index);
    callbacks.onConfirm?.();
  });
  return card;
}

export function renderCandidatePanel(
  doc: Document,
  window: CandidateWindowView,
  selectedKeyframe: number | null,
  readOnly: boolean,
  callbacks: CandidatePanelCallbacks = {},
): HTMLElement {
  const panel = doc.createElement("div");
  panel.className = "candidate-panel";

  const target = doc.createElement("div");
  target.className = "candidate-target";
  const heading = doc.createElement("h3");
  heading.textContent = `Match ${window.match_position}: turning point in A`;
  target.appendChild(heading);
  target.appendChild(
    candidateCard(doc, window.target_keyframe_a, false, false, {}),
  );
  panel.appendChild(target);

  const strip = doc.createElement("div");
  strip.className = "candidate-strip";
  for (const candidate of window.candidates) {
    strip.appendChild(
      candidateCard(
        doc,
        candidate,
        candidate.keyframe_index === selectedKeyframe,
        candidate.keyframe_index === window.proposed_keyframe_b,
        readOnly ? {} : callbacks,
      ),
    );
  }
  panel.appendChild(strip);

  const confirm = doc.createElement("button");
  confirm.className = "confirm-button";
  confirm.textContent = "Confirm selection (Enter)";
  confirm.disabled = readOnly || selectedKeyframe === null;
  confirm.addEventListener("click", () => callbacks.onConfirm?.());
  panel.appendChild(confirm);
  return panel;
}
