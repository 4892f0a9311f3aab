// Typed client for the session service. All navigation state originates
// here; the console only re-renders what the service sends.

import type {
  CreateSessionResponse,
  InstructionEcho,
  LogSummary,
  ParseErrorDetail,
  StateFrame,
} from "./types.js";

export type FetchLike = typeof fetch;

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly detail: ParseErrorDetail | null = null,
  ) {
    super(message);
  }
}

async function requireOk(response: Response): Promise<void> {
  if (response.ok) return;
  let detail: ParseErrorDetail | null = null;
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") {
      message = body.detail;
    } else if (body.detail && typeof body.detail === "object") {
      detail = body.detail as ParseErrorDetail;
      message = detail.message ?? detail.error ?? message;
    }
  } catch {
    // non-JSON error body; keep the HTTP status message
  }
  throw new ServiceError(message, response.status, detail);
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(
    archetype: string,
    sceneSeed: number,
    profile = "ORACLE",
    seed = 0,
  ): Promise<CreateSessionResponse> {
    const response = await this.fetchImpl(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        schema: "session/1",
        archetype,
        scene_seed: sceneSeed,
        profile,
        seed,
      }),
    });
    await requireOk(response);
    return (await response.json()) as CreateSessionResponse;
  }

  async submitInstruction(
    sessionId: string,
    text: string,
  ): Promise<InstructionEcho> {
    const response = await this.fetchImpl(
      this.url(`/sessions/${sessionId}/instruction`),
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ schema: "instruction/1", text }),
      },
    );
    await requireOk(response);
    return (await response.json()) as InstructionEcho;
  }

  async control(
    sessionId: string,
    command: "pause" | "resume" | "step" | "abort" | "reset",
  ): Promise<string> {
    const response = await this.fetchImpl(
      this.url(`/sessions/${sessionId}/${command}`),
      { method: "POST" },
    );
    await requireOk(response);
    const body = (await response.json()) as { status: string };
    return body.status;
  }

  async fetchState(sessionId: string): Promise<StateFrame> {
    const response = await this.fetchImpl(
      this.url(`/sessions/${sessionId}/state`),
    );
    await requireOk(response);
    return (await response.json()) as StateFrame;
  }

  async fetchLog(sessionId: string): Promise<string> {
    const response = await this.fetchImpl(
      this.url(`/sessions/${sessionId}/log`),
    );
    await requireOk(response);
    return await response.text();
  }

  /**
   * Subscribe to the SSE state stream. Frames are delivered in order to
   * `onFrame`; the returned function aborts the subscription. `onError`
   * fires once if the connection drops or cannot be established.
   */
  streamStates(
    sessionId: string,
    onFrame: (frame: StateFrame) => void,
    onError: (error: Error) => void = () => undefined,
  ): () => void {
    const controller = new AbortController();
    const run = async () => {
      const response = await this.fetchImpl(
        this.url(`/sessions/${sessionId}/stream`),
        { signal: controller.signal },
      );
      await requireOk(response);
      if (!response.body) throw new Error("stream has no body");
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let cut;
        while ((cut = buffer.indexOf("\n\n")) >= 0) {
          const chunk = buffer.slice(0, cut);
          buffer = buffer.slice(cut + 2);
          for (const line of chunk.split("\n")) {
            if (line.startsWith("data: ")) {
              onFrame(JSON.parse(line.slice(6)) as StateFrame);
            }
          }
        }
      }
    };
    run().catch((error: unknown) => {
      if (!controller.signal.aborted) {
        onError(error instanceof Error ? error : new Error(String(error)));
      }
    });
    return () => controller.abort();
  }
}

/** Derive the end-of-mission summary from the fetched JSONL log. */
export function parseLogSummary(logText: string): LogSummary {
  const lines = logText.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length < 2) throw new Error("log too short");
  const head = JSON.parse(lines[0]!) as {
    schema: string;
    spec: { optimal_length: number };
  };
  if (head.schema !== "log/1") throw new Error("not a log/1 document");
  const tail = JSON.parse(lines[lines.length - 1]!) as {
    outcome: string;
    reason: string | null;
    path_length: number;
    steps: number;
  };
  const optimal = head.spec.optimal_length;
  const spl =
    tail.outcome === "success"
      ? optimal / Math.max(tail.path_length, optimal)
      : 0;
  return {
    outcome: tail.outcome,
    reason: tail.reason,
    pathLength: tail.path_length,
    optimalLength: optimal,
    steps: tail.steps,
    spl,
  };
}
