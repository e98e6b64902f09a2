/** DOM rendering for the rating flow. Raters only ever see the caption,
 * opaque clip tokens inside URLs and their own progress; system identities
 * never reach this layer. */

import { SessionController, SCALES, ScaleName, formatProgress } from "./state.js";

const SCALE_LABELS: Record<ScaleName, string> = {
  ff: "Foreground fit",
  bf: "Background fit",
  aq: "Audio quality",
};

const SCALE_HINTS: Record<ScaleName, [string, string]> = {
  ff: ["0 = wrong source", "10 = exactly as described"],
  bf: ["0 = wrong ambience", "10 = exactly as described"],
  aq: ["0 = unusable", "10 = flawless"],
};

export class RatingApp {
  constructor(
    private readonly root: HTMLElement,
    private readonly controller: SessionController,
  ) {
    controller.onChange(() => this.render());
  }

  render(): void {
    const view = this.controller.view;
    this.root.textContent = "";
    switch (view.kind) {
      case "loading": {
        this.root.appendChild(el("p", "status", "Loading…"));
        break;
      }
      case "error": {
        this.root.appendChild(el("p", "error", view.message));
        const retry = el("button", "retry", "Retry") as HTMLButtonElement;
        retry.addEventListener("click", () => void this.controller.loadNext());
        this.root.appendChild(retry);
        break;
      }
      case "complete": {
        this.root.appendChild(el("h2", "done-title", "Session complete"));
        this.root.appendChild(
          el("p", "status", `All ${view.progress.total} clips rated. Thank you!`),
        );
        break;
      }
      case "rating": {
        const form = view.form;
        this.root.appendChild(
          el("p", "progress", formatProgress(form.progress)),
        );
        this.root.appendChild(el("p", "caption", form.caption));

        const audio = document.createElement("audio");
        audio.className = "player";
        audio.controls = true;
        audio.src = form.audioUrl;
        this.root.appendChild(audio);

        for (const scale of SCALES) {
          this.root.appendChild(this.sliderRow(scale, form.scores[scale]));
        }

        if (form.error) {
          this.root.appendChild(el("p", "error inline", form.error));
        }

        const submit = el("button", "submit", "Submit rating") as HTMLButtonElement;
        submit.disabled = !this.controller.canSubmit();
        submit.addEventListener("click", () => void this.controller.submit());
        this.root.appendChild(submit);
        break;
      }
    }
  }

  private sliderRow(scale: ScaleName, value: number | null): HTMLElement {
    const row = el("div", `scale scale-${scale}`);
    const label = el("label", "scale-label", SCALE_LABELS[scale]);
    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = "10";
    input.step = "1";
    input.name = scale;
    input.value = value === null ? "5" : String(value);
    input.addEventListener("input", () => {
      this.controller.setScore(scale, Number(input.value));
    });
    const display = el("span", "scale-value", value === null ? "–" : String(value));
    const [low, high] = SCALE_HINTS[scale];
    row.appendChild(label);
    row.appendChild(el("span", "hint hint-low", low));
    row.appendChild(input);
    row.appendChild(el("span", "hint hint-high", high));
    row.appendChild(display);
    return row;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
