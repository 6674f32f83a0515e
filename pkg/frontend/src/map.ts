/** SVG rendering of the trajectory pair.
 *
 * The two trajectories live in unrelated topometric frames (and scales),
 * so each is normalized to the shared viewport independently; since both
 * follow the same route they end up roughly overlaid, which is what the
 * reviewer needs to judge match lines. Rendering is a pure function of
 * the session view: re-rendering after any change keeps the map and the
 * match list on the same version.
 */

import type { SessionView, TrajectoryView } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
export const MAP_WIDTH = 640;
export const MAP_HEIGHT = 480;
const MARGIN = 24;

type Projector = (p: [number, number]) => [number, number];

function projector(traj: TrajectoryView): Projector {
  const xs = traj.positions.map((p) => p[0]);
  const ys = traj.positions.map((p) => p[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const scale = Math.min(
    (MAP_WIDTH - 2 * MARGIN) / spanX,
    (MAP_HEIGHT - 2 * MARGIN) / spanY,
  );
  const offsetX = (MAP_WIDTH - scale * spanX) / 2;
  const offsetY = (MAP_HEIGHT - scale * spanY) / 2;
  return ([x, y]) => [
    offsetX + (x - minX) * scale,
    // topometric y grows up, SVG y grows down
    MAP_HEIGHT - offsetY - (y - minY) * scale,
  ];
}

export interface MapCallbacks {
  onMatchClick?: (position: number) => void;
}

export function renderMap(
  doc: Document,
  session: SessionView,
  activeMatch: number,
  conflictPosition: number | null,
  callbacks: MapCallbacks = {},
): SVGSVGElement {
  const svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${MAP_WIDTH} ${MAP_HEIGHT}`);
  svg.setAttribute("class", "trajectory-map");

  const projectA = projector(session.trajectory_a);
  const projectB = projector(session.trajectory_b);

  const polyline = (traj: TrajectoryView, project: Projector, cls: string) => {
    const el = doc.createElementNS(SVG_NS, "polyline");
    el.setAttribute(
      "points",
      traj.positions.map((p) => project(p).map((v) => v.toFixed(1)).join(",")).join(" "),
    );
    el.setAttribute("class", cls);
    el.setAttribute("fill", "none");
    svg.appendChild(el);
  };
  polyline(session.trajectory_a, projectA, "traj traj-a");
  polyline(session.trajectory_b, projectB, "traj traj-b");

  const markTurningPoints = (
    points: { keyframe_index: number }[],
    traj: TrajectoryView,
    project: Projector,
    cls: string,
  ) => {
    for (const tp of points) {
      const pos = traj.positions[tp.keyframe_index];
      if (!pos) continue;
      const [cx, cy] = project(pos);
      const circle = doc.createElementNS(SVG_NS, "circle");
      circle.setAttribute("cx", cx.toFixed(1));
      circle.setAttribute("cy", cy.toFixed(1));
      circle.setAttribute("r", "4");
      circle.setAttribute("class", cls);
      svg.appendChild(circle);
    }
  };
  markTurningPoints(session.turning_points_a, session.trajectory_a, projectA, "tp tp-a");
  markTurningPoints(session.turning_points_b, session.trajectory_b, projectB, "tp tp-b");

  for (const match of session.matches) {
    const posA = session.trajectory_a.positions[match.keyframe_a];
    const posB = session.trajectory_b.positions[match.keyframe_b];
    if (!posA || !posB) continue;
    const [x1, y1] = projectA(posA);
    const [x2, y2] = projectB(posB);
    const line = doc.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", x1.toFixed(1));
    line.setAttribute("y1", y1.toFixed(1));
    line.setAttribute("x2", x2.toFixed(1));
    line.setAttribute("y2", y2.toFixed(1));
    const classes = ["match-line", `match-${match.status}`];
    if (match.position === activeMatch) classes.push("match-active");
    if (match.position === conflictPosition) classes.push("match-conflict");
    line.setAttribute("class", classes.join(" "));
    line.dataset.position = String(match.position);
    if (callbacks.onMatchClick) {
      line.addEventListener("click", () => callbacks.onMatchClick!(match.position));
    }
    svg.appendChild(line);
  }
  return svg;
}
