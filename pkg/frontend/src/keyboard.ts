/** Keyboard-first review loop. Annotators process many matches per
 * session, so everything reachable by mouse is also a key away. */

export interface KeyboardHandlers {
  onNextMatch: () => void;
  onPrevMatch: () => void;
  onOpenCandidates: () => void;
  onNextCandidate: () => void;
  onPrevCandidate: () => void;
  onConfirm: () => void;
  onReject: () => void;
  onEscape: () => void;
  enabled: () => boolean;
}

export function attachKeyboard(target: EventTarget, handlers: KeyboardHandlers): () => void {
  const onKeyDown = (event: Event) => {
    const e = event as KeyboardEvent;
    if (!handlers.enabled()) return;
    const element = e.target as HTMLElement | null;
    if (
      element &&
      (element.tagName === "INPUT" ||
        element.tagName === "TEXTAREA" ||
        element.isContentEditable)
    ) {
      return;
    }
    switch (e.key) {
      case "j":
      case "ArrowDown":
        e.preventDefault();
        handlers.onNextMatch();
        break;
      case "k":
      case "ArrowUp":
        e.preventDefault();
        handlers.onPrevMatch();
        break;
      case "o":
        e.preventDefault();
        handlers.onOpenCandidates();
        break;
      case "ArrowRight":
      case "l":
        e.preventDefault();
        handlers.onNextCandidate();
        break;
      case "ArrowLeft":
      case "h":
        e.preventDefault();
        handlers.onPrevCandidate();
        break;
      case "Enter":
        e.preventDefault();
        handlers.onConfirm();
        break;
      case "x":
        e.preventDefault();
        handlers.onReject();
        break;
      case "Escape":
        handlers.onEscape();
        break;
    }
  };
  target.addEventListener("keydown", onKeyDown);
  return () => target.removeEventListener("keydown", onKeyDown);
}
