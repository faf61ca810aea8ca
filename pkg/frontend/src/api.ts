/**
 * Typed client for the /api/v1 endpoints.
 *
 * Every number the dashboard renders comes through here; views never
 * recompute server-side quantities. Concurrent in-flight requests are
 * allowed, so callers that replace a view's data should guard with
 * LatestOnly to drop stale responses.
 */

export interface RunSummary {
  run_id: string
  case: string
  iteration: number
  commit: string
  branch: string
  started_at: string
  root_path: string
  root_value: number
  root_unit: string
}

export interface PointClass {
  kind: 'normal' | 'transient' | 'shift'
  direction?: string
  magnitude?: number
  change_index?: number
  before_median?: number
  after_median?: number
  note?: string
}

export interface SeriesPoint {
  run_id: string
  started_at: string
  value: number
  class: PointClass
}

export interface ChangePoint {
  index: number
  before_median: number
  after_median: number
  score: number
}

export interface SeriesResponse {
  case: string
  path: string
  unit: string
  points: SeriesPoint[]
  change_points: ChangePoint[]
  params: Record<string, unknown>
}

export interface LabelsResponse {
  run_id: string
  unit: string
  entries: Record<string, number>
}

export interface SunburstNode {
  path: string
  name: string
  value: number
  fraction: number
  self_value: number
  children: SunburstNode[]
}

export interface CompareRow {
  path: string
  value_a: number | null
  value_b: number | null
  unit: string
  delta: number | null
  relative: number | null
  absent_in?: 'a' | 'b'
}

export interface CompareResponse {
  run_a: RunSummary
  run_b: RunSummary
  commits: [string, string]
  rows: CompareRow[]
}

export interface DiffResponse {
  from: string
  to: string
  diff: string
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message)
  }
}

type FetchLike = (url: string) => Promise<{ status: number; json(): Promise<unknown> }>

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url) => fetch(url),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`)
    const body = (await resp.json()) as Record<string, unknown>
    if (resp.status >= 400) {
      throw new ApiError(
        resp.status,
        String(body.code ?? 'unknown'),
        String(body.message ?? `request failed (${resp.status})`),
      )
    }
    return body as T
  }

  async cases(): Promise<string[]> {
    return (await this.get<{ cases: string[] }>('/api/v1/cases')).cases
  }

  async runs(caseName: string, limit?: number): Promise<RunSummary[]> {
    const query = limit === undefined ? '' : `?limit=${limit}`
    const path = `/api/v1/cases/${encodeURIComponent(caseName)}/runs${query}`
    return (await this.get<{ runs: RunSummary[] }>(path)).runs
  }

  series(caseName: string, path: string): Promise<SeriesResponse> {
    const q = `case=${encodeURIComponent(caseName)}&path=${encodeURIComponent(path)}`
    return this.get(`/api/v1/series?${q}`)
  }

  labels(runId: string): Promise<LabelsResponse> {
    return this.get(`/api/v1/runs/${encodeURIComponent(runId)}/labels`)
  }

  async sunburst(runId: string, path?: string): Promise<SunburstNode> {
    const q = path === undefined ? '' : `?path=${encodeURIComponent(path)}`
    const body = await this.get<{ sunburst: SunburstNode }>(
      `/api/v1/runs/${encodeURIComponent(runId)}/sunburst${q}`,
    )
    return body.sunburst
  }

  compare(a: string, b: string): Promise<CompareResponse> {
    return this.get(`/api/v1/compare?a=${encodeURIComponent(a)}&b=${encodeURIComponent(b)}`)
  }

  diff(from: string, to: string): Promise<DiffResponse> {
    return this.get(`/api/v1/diff?from=${encodeURIComponent(from)}&to=${encodeURIComponent(to)}`)
  }
}

/**
 * Keeps only the latest request per slot: responses of requests that were
 * superseded before resolving yield null instead of clobbering fresh state.
 */
export class LatestOnly {
  private seq = 0

  async wrap<T>(work: Promise<T>): Promise<T | null> {
    const mine = ++this.seq
    const result = await work
    return mine === this.seq ? result : null
  }
}
