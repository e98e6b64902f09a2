/** Bootstrap: a start form that opens a session, then the rating flow. */

import { ApiClient, RaterApi } from "./api.js";
import { SessionController } from "./state.js";
import { RatingApp } from "./ui.js";

export function mountApp(root: HTMLElement, api: RaterApi = new ApiClient()): void {
  root.textContent = "";

  const title = document.createElement("h1");
  title.textContent = "Listening test";
  root.appendChild(title);

  const form = document.createElement("div");
  form.className = "start-form";

  const raterInput = document.createElement("input");
  raterInput.placeholder = "rater id";
  raterInput.name = "rater_id";
  const teamInput = document.createElement("input");
  teamInput.placeholder = "team id (or none)";
  teamInput.name = "team_id";
  const startButton = document.createElement("button");
  startButton.textContent = "Start session";
  const errorLine = document.createElement("p");
  errorLine.className = "error";

  form.appendChild(raterInput);
  form.appendChild(teamInput);
  form.appendChild(startButton);
  form.appendChild(errorLine);
  root.appendChild(form);

  const stage = document.createElement("div");
  stage.className = "stage";
  root.appendChild(stage);

  startButton.addEventListener("click", () => {
    const raterId = raterInput.value.trim();
    const teamId = teamInput.value.trim() || "none";
    if (!raterId) {
      errorLine.textContent = "Enter a rater id first.";
      return;
    }
    startButton.disabled = true;
    api
      .openSession(raterId, teamId)
      .then((session) => {
        form.remove();
        const controller = new SessionController(api, session.session_id);
        new RatingApp(stage, controller);
        return controller.loadNext();
      })
      .catch((err: unknown) => {
        startButton.disabled = false;
        errorLine.textContent = err instanceof Error ? err.message : String(err);
      });
  });
}

declare global {
  interface Window {
    scenevalMount?: typeof mountApp;
  }
}

if (typeof window !== "undefined") {
  window.scenevalMount = mountApp;
  const root = document.getElementById("app");
  if (root) mountApp(root);
}
