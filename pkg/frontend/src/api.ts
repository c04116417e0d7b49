import type { FlaggedItem, FlaggedPage, OverlayPaths, ReviewVerdict } from './types.js';

/** Thin typed client for the triage service; all state lives server-side. */
export class TriageApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      const detail = await resp.text().catch(() => '');
      throw new ApiError(resp.status, detail || resp.statusText);
    }
    return (await resp.json()) as T;
  }

  listFlagged(limit = 500, offset = 0, status?: string): Promise<FlaggedPage> {
    const params = new URLSearchParams({ limit: String(limit), offset: String(offset) });
    if (status) params.set('status', status);
    return this.request<FlaggedPage>(`/api/flagged?${params}`);
  }

  submitReview(verdict: ReviewVerdict): Promise<FlaggedItem> {
    return this.request<FlaggedItem>('/api/reviews', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(verdict),
    });
  }

  overlays(sampleId: string): Promise<OverlayPaths> {
    return this.request<OverlayPaths>(`/api/samples/${encodeURIComponent(sampleId)}/overlays`);
  }

  metrics(): Promise<unknown> {
    return this.request<unknown>('/api/metrics');
  }
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}
