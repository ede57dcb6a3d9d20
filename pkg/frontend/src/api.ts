/**
 * Typed client for the NeuSymMS REST API.
 *
 * The console performs no memory logic of its own: every read and every
 * mutation is one of these calls, and fact objects are passed through in
 * their canonical serialized form (snake_case keys, RFC 3339 "Z"
 * timestamps, lowercase enum strings).
 */

export type Scope = "user" | "agent" | "flow";
export type MemoryType = "short_term" | "long_term";
export type Category =
  | "personal" | "preference" | "task" | "relationship" | "skill"
  | "context" | "instruction" | "temporal" | "other";

export interface MemoryFact {
  id: string;
  user_id: string;
  scope: Scope;
  agent_id: string | null;
  flow_id: string | null;
  subject: string;
  relation: string;
  value: string;
  category: Category;
  memory_type: MemoryType;
  confidence: number;
  access_count: number;
  source_text: string;
  created_at: string;
  last_accessed_at: string;
  is_active: boolean;
}

export interface FactPage {
  facts: MemoryFact[];
  total: number;
  limit: number;
  offset: number;
  snapshot_seq: number;
}

export interface Summary {
  active_count: number;
  long_term_count: number;
  short_term_count: number;
  by_category: Record<string, number>;
  by_scope: Record<string, number>;
}

export interface ListParams {
  scope?: Scope;
  agent_id?: string;
  flow_id?: string;
  category?: Category;
  memory_type?: MemoryType;
  is_active?: "true" | "false" | "all";
  search?: string;
  order?: string;
  limit?: number;
  offset?: number;
  snapshot_seq?: number;
}

/** PATCH-able fields; the API rejects anything else. */
export interface PatchFields {
  subject?: string;
  relation?: string;
  value?: string;
  category?: Category;
  memory_type?: MemoryType;
  confidence?: number;
  is_active?: boolean;
}

export interface ClearParams {
  scope?: Scope;
  agent_id?: string;
  flow_id?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
    message?: string,
  ) {
    super(message ?? `API error ${status}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ApiConfig {
  baseUrl: string;
  token: string;
  fetchFn?: FetchLike;
}

function queryString(params: ListParams): string {
  const pairs: string[] = [];
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined && value !== null && value !== "") {
      pairs.push(`${encodeURIComponent(key)}=${encodeURIComponent(String(value))}`);
    }
  }
  return pairs.length ? `?${pairs.join("&")}` : "";
}

export class MemoryApi {
  private readonly baseUrl: string;
  private readonly token: string;
  private readonly fetchFn: FetchLike;

  constructor(cfg: ApiConfig) {
    this.baseUrl = cfg.baseUrl.replace(/\/+$/, "");
    this.token = cfg.token;
    this.fetchFn = cfg.fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    };
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    let payload: unknown = null;
    if (text) {
      try {
        payload = JSON.parse(text);
      } catch {
        payload = text;
      }
    }
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "detail" in payload
          ? (payload as { detail: unknown }).detail
          : payload;
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  listFacts(userId: string, params: ListParams = {}): Promise<FactPage> {
    return this.request("GET",
      `/v1/users/${encodeURIComponent(userId)}/facts${queryString(params)}`);
  }

  summary(userId: string): Promise<Summary> {
    return this.request("GET",
      `/v1/users/${encodeURIComponent(userId)}/facts/summary`);
  }

  patchFact(factId: string, fields: PatchFields): Promise<MemoryFact> {
    return this.request("PATCH", `/v1/facts/${encodeURIComponent(factId)}`, fields);
  }

  deleteFact(factId: string): Promise<MemoryFact> {
    return this.request("DELETE", `/v1/facts/${encodeURIComponent(factId)}`);
  }

  clearFacts(userId: string, params: ClearParams = {}): Promise<{ cleared: number }> {
    return this.request("POST",
      `/v1/users/${encodeURIComponent(userId)}/facts:clear`, params);
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }
}
