/** Thin typed client for the workbench API.
 *
 * The fetch implementation is injectable so tests can run against
 * canned responses without a network. Error payloads surface their
 * `detail` string verbatim; the dashboard renders it inline.
 */

import type {
  ClassLabel,
  ClassMetricsResponse,
  ImportanceResponse,
  MatchMode,
  MetricsResponse,
  NeighborsResponse,
  SearchResponse,
  TransactionsResponse,
  VisualizationResponse,
  WhatIfOverrides,
  WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (url, init) => fetch(url, init);

export interface TransactionsQuery {
  correct?: boolean;
}

export interface NeighborsQuery {
  groups?: string[];
  k?: number;
}

export class WorkbenchClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = defaultFetch,
  ) {}

  metrics(): Promise<MetricsResponse> {
    return this.request("/metrics");
  }

  classMetrics(label: ClassLabel): Promise<ClassMetricsResponse> {
    return this.request("/metrics", { class: label });
  }

  transactions(label: ClassLabel, query: TransactionsQuery = {}): Promise<TransactionsResponse> {
    const params: Record<string, string> = { class: label };
    if (query.correct !== undefined) params.correct = String(query.correct);
    return this.request("/transactions", params);
  }

  search(term: string, match: MatchMode = "contains"): Promise<SearchResponse> {
    // Empty terms are rejected locally; no request leaves the client.
    if (term.trim() === "") {
      return Promise.reject(new Error("search term must not be empty"));
    }
    return this.request("/search", { term, match });
  }

  neighbors(sha: string, query: NeighborsQuery = {}): Promise<NeighborsResponse> {
    const params: Record<string, string> = { sha };
    if (query.groups !== undefined) params.groups = query.groups.join(",");
    if (query.k !== undefined) params.k = String(query.k);
    return this.request("/neighbors", params);
  }

  visualization(label: ClassLabel, axis: string): Promise<VisualizationResponse> {
    return this.request("/visualization", { class: label, axis });
  }

  whatIf(sha: string, overrides: WhatIfOverrides): Promise<WhatIfResponse> {
    return this.request(
      "/whatif",
      {},
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ sha, overrides }),
      },
    );
  }

  importance(): Promise<ImportanceResponse> {
    return this.request("/importance");
  }

  private async request<T>(
    path: string,
    params: Record<string, string> = {},
    init?: RequestInit,
  ): Promise<T> {
    const query = new URLSearchParams(params).toString();
    const url = `${this.baseUrl}${path}${query ? `?${query}` : ""}`;
    const response = await this.fetchImpl(url, init);
    const body: unknown = await response.json();
    if (!response.ok) {
      const detail = (body as { detail?: unknown }).detail;
      throw new ApiError(
        response.status,
        typeof detail === "string" ? detail : response.statusText,
      );
    }
    return body as T;
  }
}
