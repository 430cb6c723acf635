/**
 * Typed client for the loanlens HTTP API. The UI never computes model math
 * locally; every displayed number comes from these endpoints.
 */

export type Decision = "accepted" | "rejected";
export type Verdict = "fair" | "unfair" | "cleared";
export type SortKey = "id" | "decision" | "confidence" | "judgment";
export type Order = "asc" | "desc";
export type EventKind =
  | "filter"
  | "sort"
  | "select_application"
  | "compare"
  | "judgment"
  | "suggestion"
  | "rating";

export interface OverviewCounts {
  accepted: number;
  rejected: number;
  judged_fair: number;
  judged_unfair: number;
}

export interface DistributionBin {
  lo: number;
  hi: number;
  accepted_pct: number;
  rejected_pct: number;
}

export interface ModelAttribute {
  name: string;
  kind: string;
  categories: string[];
  provenance: string;
  sensitive: boolean;
  weight: number;
  importance: number;
  distribution: { constant: boolean; bins: DistributionBin[] };
}

export interface ModelInfo {
  algorithm: string;
  intercept: number;
  attributes: ModelAttribute[];
}

export interface AppListItem {
  id: string;
  decision: Decision;
  confidence: number;
  judgment: "fair" | "unfair" | null;
  needs_human: boolean;
}

export interface AppListPage {
  items: AppListItem[];
  total: number;
  page: number;
  page_size: number;
}

export interface DetailAttribute {
  name: string;
  kind: string;
  value: string | number;
  encoded: number;
  weight: number;
  criticality: number;
  provenance: string;
  sensitive: boolean;
}

export interface ApplicationDetail {
  id: string;
  decision: Decision;
  confidence: number;
  utility: number;
  intercept: number;
  judgment: "fair" | "unfair" | null;
  needs_human: boolean;
  slider_bounds: [number, number];
  attributes: DetailAttribute[];
}

export interface SimilarItem {
  id: string;
  similarity: number;
  confidence: number;
  decision: Decision;
  selectable: boolean;
}

export interface SimilarResponse {
  target: string;
  lo: number;
  hi: number;
  items: SimilarItem[];
}

export interface CompareAttribute {
  name: string;
  a_value: string | number;
  b_value: string | number;
  similarity: number;
}

export interface CompareResponse {
  a: string;
  b: string;
  similarity: number;
  attributes: CompareAttribute[];
}

export interface FairnessNumbers {
  disparate_impact: number;
  verdict: "fair" | "unfair";
  protected_accept_rate: number;
  reference_accept_rate: number;
}

export interface FairnessDelta {
  group_attribute: string;
  protected: string;
  before: FairnessNumbers;
  after: FairnessNumbers;
  overridden_applications: string[];
  suggestion_count: number;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly field?: string;

  constructor(status: number, code: string, message: string, field?: string) {
    super(message);
    this.status = status;
    this.code = code;
    this.field = field;
  }
}

/** The surface the store depends on; tests substitute a fake. */
export interface WorkbenchApi {
  createSession(country: string, preRating?: number): Promise<string>;
  overview(): Promise<OverviewCounts>;
  model(): Promise<ModelInfo>;
  applications(
    sort: SortKey,
    order: Order,
    filter: string,
    pageSize?: number,
  ): Promise<AppListPage>;
  detail(id: string): Promise<ApplicationDetail>;
  judge(
    id: string,
    verdict: Verdict,
    needsHuman: boolean,
  ): Promise<OverviewCounts>;
  suggestWeights(id: string, weights: Record<string, number>): Promise<void>;
  similar(id: string, lo: number, hi: number): Promise<SimilarResponse>;
  compare(id: string, otherId: string): Promise<CompareResponse>;
  fairnessReport(groupAttribute: string): Promise<FairnessDelta>;
  logEvent(kind: EventKind, payload: Record<string, unknown>): Promise<void>;
}

export class ApiClient implements WorkbenchApi {
  private readonly baseUrl: string;
  private token: string | null = null;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  get sessionToken(): string | null {
    return this.token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["X-Session-Token"] = this.token;
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = `http_${response.status}`;
      let message = response.statusText;
      let field: string | undefined;
      try {
        const parsed = (await response.json()) as {
          error?: { code?: string; message?: string; field?: string };
        };
        if (parsed.error) {
          code = parsed.error.code ?? code;
          message = parsed.error.message ?? message;
          field = parsed.error.field;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, message, field);
    }
    return (await response.json()) as T;
  }

  async createSession(country: string, preRating?: number): Promise<string> {
    const body: Record<string, unknown> = { country };
    if (preRating !== undefined) body.pre_rating = preRating;
    const out = await this.request<{ session_id: string }>(
      "POST",
      "/sessions",
      body,
    );
    this.token = out.session_id;
    return out.session_id;
  }

  overview(): Promise<OverviewCounts> {
    return this.request("GET", "/overview");
  }

  model(): Promise<ModelInfo> {
    return this.request("GET", "/model");
  }

  applications(
    sort: SortKey,
    order: Order,
    filter: string,
    pageSize = 300,
  ): Promise<AppListPage> {
    const params = new URLSearchParams({
      sort,
      order,
      page_size: String(pageSize),
    });
    if (filter) params.set("filter", filter);
    return this.request("GET", `/applications?${params}`);
  }

  detail(id: string): Promise<ApplicationDetail> {
    return this.request("GET", `/applications/${encodeURIComponent(id)}`);
  }

  async judge(
    id: string,
    verdict: Verdict,
    needsHuman: boolean,
  ): Promise<OverviewCounts> {
    const out = await this.request<{ overview: OverviewCounts }>(
      "POST",
      `/applications/${encodeURIComponent(id)}/judgment`,
      { verdict, needs_human: needsHuman },
    );
    return out.overview;
  }

  async suggestWeights(
    id: string,
    weights: Record<string, number>,
  ): Promise<void> {
    await this.request(
      "POST",
      `/applications/${encodeURIComponent(id)}/weights`,
      { weights },
    );
  }

  similar(id: string, lo: number, hi: number): Promise<SimilarResponse> {
    const params = new URLSearchParams({ lo: String(lo), hi: String(hi) });
    return this.request(
      "GET",
      `/applications/${encodeURIComponent(id)}/similar?${params}`,
    );
  }

  compare(id: string, otherId: string): Promise<CompareResponse> {
    return this.request(
      "GET",
      `/applications/${encodeURIComponent(id)}/similar/${encodeURIComponent(otherId)}`,
    );
  }

  fairnessReport(groupAttribute: string): Promise<FairnessDelta> {
    const params = new URLSearchParams({ group_attribute: groupAttribute });
    return this.request("GET", `/reports/fairness?${params}`);
  }

  async logEvent(
    kind: EventKind,
    payload: Record<string, unknown>,
  ): Promise<void> {
    if (!this.token) throw new ApiError(0, "no_session", "no session yet");
    await this.request("POST", `/sessions/${this.token}/events`, {
      kind,
      payload,
    });
  }
}
