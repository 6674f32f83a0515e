/** The review application: wires the API client, the view state, and the
 * DOM renderers together. All mutations flow through the corrections
 * endpoint; every server rejection lands in the banner; any re-render is
 * a pure function of the latest server responses. */

import { ApiClient, ApiError } from "./api.js";
import { renderCandidatePanel } from "./candidates.js";
import { attachKeyboard } from "./keyboard.js";
import { renderMap } from "./map.js";
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
  setActive,
  withBanner,
  withSession,
  type ViewState,
} from "./state.js";
import type { CorrectionRequest, SessionView } from "./types.js";

export class ReviewApp {
  private readonly doc: Document;
  private readonly root: HTMLElement;
  private readonly api: ApiClient;
  private state!: ViewState;
  private detachKeyboard: (() => void) | null = null;

  constructor(doc: Document, root: HTMLElement, api: ApiClient) {
    this.doc = doc;
    this.root = root;
    this.api = api;
  }

  get viewState(): ViewState {
    return this.state;
  }

  async load(sessionId: string): Promise<void> {
    const session = await this.api.getSession(sessionId);
    this.state = initialState(session);
    if (!this.detachKeyboard) {
      this.detachKeyboard = attachKeyboard(this.doc, {
        enabled: () => true,
        onNextMatch: () => this.update(moveActive(this.state, 1)),
        onPrevMatch: () => this.update(moveActive(this.state, -1)),
        onOpenCandidates: () => void this.openActiveCandidates(),
        onNextCandidate: () => this.update(moveSelection(this.state, 1)),
        onPrevCandidate: () => this.update(moveSelection(this.state, -1)),
        onConfirm: () => void this.submitSelection(),
        onReject: () => void this.rejectActive(),
        onEscape: () => this.update(closeCandidates(this.state)),
      });
    }
    this.render();
  }

  dispose(): void {
    this.detachKeyboard?.();
    this.detachKeyboard = null;
  }

  private update(state: ViewState): void {
    this.state = state;
    this.render();
  }

  private async refetchSession(): Promise<SessionView> {
    return this.api.getSession(this.state.session.session_id);
  }

  async openMatch(position: number): Promise<void> {
    this.update(setActive(this.state, position));
    await this.openActiveCandidates();
  }

  async openActiveCandidates(): Promise<void> {
    try {
      const window = await this.api.getCandidates(
        this.state.session.session_id,
        this.state.activeMatch,
      );
      this.update(openCandidates(this.state, window));
    } catch (error) {
      this.showError(error);
    }
  }

  selectCandidate(keyframeIndex: number): void {
    this.update(selectCandidate(this.state, keyframeIndex));
  }

  /** Submit the current selection (confirm or set). On a version
   * conflict the session is refetched and the selection replayed once if
   * it is still valid; a second failure is surfaced for the annotator. */
  async submitSelection(): Promise<void> {
    const pending = pendingCorrection(this.state);
    if (!pending) return;
    await this.submitCorrection({ version: this.state.session.version, ...pending });
  }

  async rejectActive(): Promise<void> {
    if (isReadOnly(this.state)) return;
    await this.submitCorrection({
      version: this.state.session.version,
      action: "reject",
      position: this.state.activeMatch,
    });
  }

  async submitCorrection(correction: CorrectionRequest): Promise<void> {
    try {
      await this.api.postCorrection(this.state.session.session_id, correction);
    } catch (error) {
      if (error instanceof ApiError && error.code === "version_conflict") {
        const session = await this.refetchSession();
        const replay = { ...correction, version: session.version };
        this.state = withSession(this.state, session);
        try {
          await this.api.postCorrection(session.session_id, replay);
        } catch (replayError) {
          await this.reloadSession(); // refresh first: reload clears banners
          this.showError(replayError, "your view was stale; pick again");
          return;
        }
      } else {
        this.showError(error);
        return;
      }
    }
    await this.reloadSession();
  }

  async finalize(): Promise<void> {
    try {
      await this.api.finalize(this.state.session.session_id);
    } catch (error) {
      this.showError(error);
      return;
    }
    await this.reloadSession();
  }

  /** Refresh from the server and advance to the first unresolved match.
   * Keeping the active match a pure function of server state is what
   * makes a page reload land on the identical view. */
  private async reloadSession(): Promise<void> {
    const session = await this.refetchSession();
    let next = withSession(withBanner(this.state, null), session);
    next = setActive(next, firstUnresolvedMatch(session.matches));
    this.update(closeCandidates(next));
  }

  private showError(error: unknown, hint?: string): void {
    let text: string;
    let conflictPosition: number | undefined;
    if (error instanceof ApiError) {
      text = `${error.code}: ${error.message}`;
      // order-preservation rejections name the conflicting pair "(a, b)"
      const named = /pair \((\d+), (\d+)\)/.exec(error.message);
      if (named) {
        const indexA = Number(named[1]);
        const match = this.state.session.matches.find((m) => m.index_a === indexA);
        conflictPosition = match?.position;
      }
    } else {
      text = String(error);
    }
    if (hint) text += ` (${hint})`;
    this.update(
      withBanner(this.state, { kind: "error", text, ...(conflictPosition !== undefined ? { conflictPosition } : {}) }),
    );
  }

  // -- rendering ---------------------------------------------------------

  private render(): void {
    const doc = this.doc;
    this.root.textContent = "";
    const state = this.state;
    const readOnly = isReadOnly(state);

    const header = doc.createElement("header");
    header.className = "session-header";
    const title = doc.createElement("h2");
    title.textContent = `${state.session.scene_id} · session ${state.session.session_id}`;
    header.appendChild(title);
    const meta = doc.createElement("span");
    meta.className = "session-meta";
    meta.dataset.status = state.session.status;
    meta.dataset.version = String(state.session.version);
    meta.textContent = `${state.session.status} · v${state.session.version}`;
    header.appendChild(meta);
    const finalize = doc.createElement("button");
    finalize.className = "finalize-button";
    finalize.textContent = "Finalize session";
    finalize.disabled = readOnly || !allResolved(state);
    finalize.addEventListener("click", () => void this.finalize());
    header.appendChild(finalize);
    this.root.appendChild(header);

    if (state.banner) {
      const banner = doc.createElement("div");
      banner.className = `banner banner-${state.banner.kind}`;
      banner.setAttribute("role", "alert");
      banner.textContent = state.banner.text;
      this.root.appendChild(banner);
    }
    if (readOnly) {
      const note = doc.createElement("div");
      note.className = "banner banner-info readonly-note";
      note.textContent = "Session is finalized: read-only.";
      this.root.appendChild(note);
    }

    const layout = doc.createElement("div");
    layout.className = "layout";

    const mapPane = doc.createElement("div");
    mapPane.className = "map-pane";
    mapPane.appendChild(
      renderMap(doc, state.session, state.activeMatch, state.banner?.conflictPosition ?? null, {
        onMatchClick: (position) => void this.openMatch(position),
      }),
    );
    layout.appendChild(mapPane);

    const listPane = doc.createElement("div");
    listPane.className = "list-pane";
    const list = doc.createElement("ul");
    list.className = "match-list";
    for (const match of state.session.matches) {
      const item = doc.createElement("li");
      const classes = ["match-item", `match-${match.status}`];
      if (match.position === state.activeMatch) classes.push("match-active");
      item.className = classes.join(" ");
      item.dataset.position = String(match.position);
      item.textContent =
        `#${match.position} A:kf${match.keyframe_a} ↔ B:kf${match.keyframe_b} ` +
        `[${match.status}]`;
      item.addEventListener("click", () => void this.openMatch(match.position));
      list.appendChild(item);
    }
    listPane.appendChild(list);
    layout.appendChild(listPane);
    this.root.appendChild(layout);

    if (state.candidates) {
      this.root.appendChild(
        renderCandidatePanel(doc, state.candidates, state.selectedCandidate, readOnly, {
          onSelect: (kf) => this.selectCandidate(kf),
          onConfirm: () => void this.submitSelection(),
        }),
      );
    }
  }
}
