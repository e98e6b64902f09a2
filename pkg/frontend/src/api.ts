/** Typed client for the listening-test service HTTP API. */

export interface Progress {
  done: number;
  total: number;
}

export interface SessionSummary {
  session_id: string;
  completed: boolean;
  progress: Progress;
}

export interface NextItem {
  completed: boolean;
  clip_token?: string;
  audio_url?: string;
  caption?: string;
  progress: Progress;
}

export interface RatingAck {
  ok: boolean;
  completed: boolean;
  progress: Progress;
}

/** Server-side rejection carrying the service's error code. */
export class ApiRequestError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiRequestError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** The surface the rating flow needs; ApiClient is the HTTP implementation. */
export interface RaterApi {
  openSession(raterId: string, teamId: string): Promise<SessionSummary>;
  nextItem(sessionId: string): Promise<NextItem>;
  submitRating(
    sessionId: string,
    clipToken: string,
    ff: number,
    bf: number,
    aq: number,
  ): Promise<RatingAck>;
}

export class ApiClient implements RaterApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    if (!response.ok) {
      let code = `HTTP${response.status}`;
      let message = text;
      try {
        const body = JSON.parse(text) as { error?: string; message?: string };
        if (body.error) code = body.error;
        if (body.message) message = body.message;
      } catch {
        // non-JSON error body; keep the raw text
      }
      throw new ApiRequestError(code, message, response.status);
    }
    return JSON.parse(text) as T;
  }

  openSession(raterId: string, teamId: string): Promise<SessionSummary> {
    return this.request<SessionSummary>("/api/session", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ rater_id: raterId, team_id: teamId }),
    });
  }

  nextItem(sessionId: string): Promise<NextItem> {
    return this.request<NextItem>(`/api/session/${encodeURIComponent(sessionId)}/next`);
  }

  submitRating(
    sessionId: string,
    clipToken: string,
    ff: number,
    bf: number,
    aq: number,
  ): Promise<RatingAck> {
    return this.request<RatingAck>(
      `/api/session/${encodeURIComponent(sessionId)}/rating`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ clip_token: clipToken, ff, bf, aq }),
      },
    );
  }
}
