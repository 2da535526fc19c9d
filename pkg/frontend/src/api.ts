/** Thin typed client for the gateway API. All state lives on the server;
 *  this module only moves JSON. */

import type {
  EmbeddingPage, HitsResponse, InterpolateResponse, MetaResponse,
  MixtureResponse, PointResponse, SensitivityResponse, SessionCreated,
  SimilarityPage, StateResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ApiError {
  status: number;
  code: string;
  message: string;
  field?: string | null;
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok) {
      throw { status: resp.status, ...payload } as ApiError;
    }
    return payload as T;
  }

  meta(): Promise<MetaResponse> {
    return this.request("GET", "/api/meta");
  }

  createSession(seed?: number): Promise<SessionCreated> {
    return this.request("POST", "/api/session", seed === undefined ? {} : { seed });
  }

  sessionState(sid: string): Promise<StateResponse> {
    return this.request("GET", `/api/session/${sid}`);
  }

  adjustInput(sid: string, dim: number, value: number): Promise<MixtureResponse> {
    return this.request("POST", `/api/session/${sid}/input`, { dim, value });
  }

  search(sid: string, k?: number): Promise<HitsResponse> {
    return this.request("POST", `/api/session/${sid}/search`, k === undefined ? {} : { k });
  }

  select(sid: string, recordId: number): Promise<StateResponse> {
    return this.request("POST", `/api/session/${sid}/select`, { record_id: recordId });
  }

  setTarget(sid: string, outputIndex: number, value: number): Promise<StateResponse> {
    return this.request("POST", `/api/session/${sid}/target`,
      { output_index: outputIndex, value });
  }

  suggest(sid: string, k?: number, beta?: number): Promise<HitsResponse> {
    const body: Record<string, number> = {};
    if (k !== undefined) body.k = k;
    if (beta !== undefined) body.beta = beta;
    return this.request("POST", `/api/session/${sid}/suggest`, body);
  }

  interpolate(sid: string, toId: number, steps?: number): Promise<InterpolateResponse> {
    const body: Record<string, number> = { to_id: toId };
    if (steps !== undefined) body.steps = steps;
    return this.request("POST", `/api/session/${sid}/interpolate`, body);
  }

  commit(sid: string, stepIndex: number): Promise<StateResponse> {
    return this.request("POST", `/api/session/${sid}/commit`, { step_index: stepIndex });
  }

  pick(sid: string, recordId: number): Promise<StateResponse> {
    return this.request("POST", `/api/session/${sid}/pick`, { record_id: recordId });
  }

  embeddingPage(space: string, page: number, pageSize: number): Promise<EmbeddingPage> {
    return this.request("GET",
      `/api/embedding?space=${space}&page=${page}&page_size=${pageSize}`);
  }

  point(id: number, selected?: number): Promise<PointResponse> {
    const suffix = selected === undefined ? "" : `?selected=${selected}`;
    return this.request("GET", `/api/point/${id}${suffix}`);
  }

  sensitivity(mixture: number[], outputIndex: number, seed?: number): Promise<SensitivityResponse> {
    const body: Record<string, unknown> = { mixture, output_index: outputIndex };
    if (seed !== undefined) body.seed = seed;
    return this.request("POST", "/api/sensitivity", body);
  }

  similarityPage(selected: number, page: number, pageSize: number): Promise<SimilarityPage> {
    return this.request("GET",
      `/api/similarity?selected=${selected}&page=${page}&page_size=${pageSize}`);
  }
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

/** Load every embedding page; concatenation equals the unpaginated result.
 *  Transient page failures are retried with exponential backoff. */
export async function loadFullEmbedding(
  client: ApiClient,
  space: string,
  pageSize = 10000,
  maxRetries = 4,
  baseDelayMs = 250,
): Promise<{ ids: number[]; xy: number[][] }> {
  const ids: number[] = [];
  const xy: number[][] = [];
  let page = 0;
  for (;;) {
    let attempt = 0;
    let result;
    for (;;) {
      try {
        result = await client.embeddingPage(space, page, pageSize);
        break;
      } catch (err) {
        attempt += 1;
        if (attempt > maxRetries) throw err;
        await sleep(baseDelayMs * 2 ** (attempt - 1));
      }
    }
    if (result.ids.length === 0) break;
    ids.push(...result.ids);
    xy.push(...result.xy);
    if (ids.length >= result.total) break;
    page += 1;
  }
  return { ids, xy };
}
