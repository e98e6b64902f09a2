/** Session state machine, kept free of DOM concerns so it can be tested
 * headless. Enforces the service's strict in-order contract: the only
 * token ever submitted is the one currently on display, and the next item
 * is fetched only after the server acknowledged the previous rating. */

import { ApiRequestError, Progress, RaterApi } from "./api.js";

export type ScaleName = "ff" | "bf" | "aq";
export const SCALES: ScaleName[] = ["ff", "bf", "aq"];
export const SCORE_MIN = 0;
export const SCORE_MAX = 10;

export interface RatingFormState {
  clipToken: string;
  audioUrl: string;
  caption: string;
  scores: Record<ScaleName, number | null>;
  progress: Progress;
  /** inline server/network rejection for the current form, if any */
  error: string | null;
}

export type View =
  | { kind: "loading" }
  | { kind: "rating"; form: RatingFormState }
  | { kind: "complete"; progress: Progress }
  | { kind: "error"; message: string };

export class SessionController {
  private currentView: View = { kind: "loading" };
  private inFlight = false;
  private listeners: Array<() => void> = [];

  constructor(
    private readonly api: RaterApi,
    readonly sessionId: string,
  ) {}

  get view(): View {
    return this.currentView;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private setView(view: View): void {
    this.currentView = view;
    for (const listener of this.listeners) listener();
  }

  /** Fetch the current item and show it with all three scales unset. */
  async loadNext(): Promise<void> {
    this.setView({ kind: "loading" });
    let item;
    try {
      item = await this.api.nextItem(this.sessionId);
    } catch (err) {
      this.setView({ kind: "error", message: describe(err) });
      return;
    }
    if (item.completed || !item.clip_token) {
      this.setView({ kind: "complete", progress: item.progress });
      return;
    }
    this.setView({
      kind: "rating",
      form: {
        clipToken: item.clip_token,
        audioUrl: item.audio_url ?? "",
        caption: item.caption ?? "",
        scores: { ff: null, bf: null, aq: null },
        progress: item.progress,
        error: null,
      },
    });
  }

  setScore(scale: ScaleName, value: number): void {
    if (this.currentView.kind !== "rating") return;
    const clamped = Math.min(SCORE_MAX, Math.max(SCORE_MIN, Math.round(value)));
    const form = this.currentView.form;
    this.setView({
      kind: "rating",
      form: { ...form, scores: { ...form.scores, [scale]: clamped }, error: null },
    });
  }

  /** Submit is allowed only with every scale set and nothing in flight. */
  canSubmit(): boolean {
    return (
      !this.inFlight &&
      this.currentView.kind === "rating" &&
      SCALES.every((scale) => this.currentView.kind === "rating" &&
        this.currentView.form.scores[scale] !== null)
    );
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.currentView.kind !== "rating") return;
    const form = this.currentView.form;
    this.inFlight = true;
    this.setView(this.currentView); // repaint so the button disables
    try {
      const ack = await this.api.submitRating(
        this.sessionId,
        form.clipToken,
        form.scores.ff as number,
        form.scores.bf as number,
        form.scores.aq as number,
      );
      this.inFlight = false;
      if (ack.completed) {
        this.setView({ kind: "complete", progress: ack.progress });
      } else {
        await this.loadNext();
      }
    } catch (err) {
      this.inFlight = false;
      if (err instanceof ApiRequestError) {
        if (err.code === "OutOfOrderToken") {
          // stale token: resynchronise with the server's current item
          await this.loadNext();
          return;
        }
        if (err.code === "SessionComplete") {
          this.setView({ kind: "complete", progress: form.progress });
          return;
        }
        // e.g. ScoreOutOfRange: keep the form, show the rejection inline
        this.setView({
          kind: "rating",
          form: { ...form, error: `${err.code}: ${err.message}` },
        });
        return;
      }
      // network failure: keep the form so nothing the rater entered is lost
      this.setView({
        kind: "rating",
        form: { ...form, error: describe(err) },
      });
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}

export function formatProgress(progress: Progress): string {
  return `${progress.done} / ${progress.total}`;
}
