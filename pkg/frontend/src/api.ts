// Typed client for the engine's HTTP API. The console talks to the backend
// exclusively through this module.

export interface DokLevelInfo {
  level: number;
  name: string;
  definition: string;
}

export interface QuestionView {
  question_id: string;
  question: string;
  answer: string;
  provenance: string[];
}

export interface GenerateResponse {
  request_id: string;
  questions: QuestionView[];
}

export interface GenerateBody {
  concept: string;
  level: number;
  mode: "dok" | "dok+rag";
  model?: string;
  count: number;
}

export type ScoresByQuestion = Record<string, Record<string, number>>;

export interface ApiErrorPayload {
  stage: string;
  code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly payload: ApiErrorPayload,
  ) {
    super(`[${payload.stage}/${payload.code}] ${payload.message}`);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let payload: ApiErrorPayload;
      try {
        const body = await resp.json();
        payload = {
          stage: body.stage ?? "api",
          code: body.code ?? String(resp.status),
          message: body.message ?? JSON.stringify(body.detail ?? body),
        };
      } catch {
        payload = { stage: "api", code: String(resp.status), message: resp.statusText };
      }
      throw new ApiError(resp.status, payload);
    }
    return resp.json() as Promise<T>;
  }

  health(): Promise<{ status: string }> {
    return this.request("/api/health");
  }

  levels(): Promise<{ levels: DokLevelInfo[] }> {
    return this.request("/api/levels");
  }

  addDocument(title: string, body: string, kind: string): Promise<{ doc_id: string }> {
    return this.request("/api/corpus/documents", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ title, body, kind }),
    });
  }

  buildIndex(): Promise<{ chunks_indexed: number }> {
    return this.request("/api/index/build", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: "{}",
    });
  }

  generate(body: GenerateBody): Promise<GenerateResponse> {
    return this.request("/api/generate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  evaluate(requestId: string, metrics: string[] = ["pinc", "judge"]): Promise<{
    request_id: string;
    scores: ScoresByQuestion;
  }> {
    return this.request("/api/evaluate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ request_id: requestId, metrics }),
    });
  }
}
