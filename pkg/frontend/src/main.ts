// Entry point: reads configuration, remembers the rater id, mounts the app.
//
// Configuration is one base-URL setting plus the session id:
//   index.html?server=http://localhost:8000&session=STUDY&rater=alice
// The rater id survives reloads in sessionStorage once entered.

import { ApiClient } from "./api.js";
import { StudySession } from "./state.js";
import { mountStudy } from "./view.js";

function requireParam(params: URLSearchParams, key: string): string | null {
  const fromUrl = params.get(key);
  if (fromUrl) {
    sessionStorage.setItem(`rank-ui:${key}`, fromUrl);
    return fromUrl;
  }
  return sessionStorage.getItem(`rank-ui:${key}`);
}

export function bootstrap(root: HTMLElement): StudySession | null {
  const params = new URLSearchParams(window.location.search);
  const server = requireParam(params, "server") ?? window.location.origin;
  const sessionId = requireParam(params, "session");
  let rater = requireParam(params, "rater");
  if (!rater) {
    rater = window.prompt("Enter your rater id:") ?? "";
    if (rater) sessionStorage.setItem("rank-ui:rater", rater);
  }
  if (!sessionId || !rater) {
    root.textContent = "Missing ?session=… or rater id.";
    return null;
  }
  const session = new StudySession(new ApiClient(server), sessionId, rater);
  mountStudy(root, session);
  void session.loadNext();
  return session;
}

const rootElement = document.getElementById("app");
if (rootElement) {
  bootstrap(rootElement);
}
