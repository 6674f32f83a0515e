/** Browser bootstrap: pick a session from ?session= (or show the list)
 * and mount the review app. The service base URL is configurable via
 * ?api=; by default the UI talks to the host that served it. */

import { ApiClient } from "./api.js";
import { ReviewApp } from "./app.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(params.get("api") ?? "");
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");

  const sessionId = params.get("session");
  if (!sessionId) {
    const { sessions } = await api.listSessions();
    root.textContent = "";
    const heading = document.createElement("h2");
    heading.textContent = "Annotation sessions";
    root.appendChild(heading);
    const list = document.createElement("ul");
    for (const id of sessions) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `?session=${id}`;
      link.textContent = id;
      item.appendChild(link);
      list.appendChild(item);
    }
    root.appendChild(list);
    return;
  }
  const app = new ReviewApp(document, root as HTMLElement, api);
  await app.load(sessionId);
}

void boot();
