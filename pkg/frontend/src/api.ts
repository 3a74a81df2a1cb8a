// Typed client for the gateway HTTP API. Every console interaction with
// the engine goes through this module — nothing else touches the network.

import type {
  CapturesResponse,
  ErrorBody,
  PlanResponse,
  PlannerOverrides,
  SessionRequest,
  SessionResponse,
  StepResponse,
  Waypoint,
} from './types.js';

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, body: ErrorBody) {
    super(body.message);
    this.name = 'ApiError';
    this.code = body.code;
    this.status = status;
    this.detail = body.detail;
  }
}

export interface BBox {
  min_lat?: number;
  max_lat?: number;
  min_lon?: number;
  max_lon?: number;
}

type FetchFn = typeof fetch;

export class GatewayClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchFn;

  constructor(baseUrl: string, fetchFn: FetchFn = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn;
  }

  async captures(bbox: BBox = {}): Promise<CapturesResponse> {
    const query = new URLSearchParams();
    for (const [key, value] of Object.entries(bbox)) {
      if (value !== undefined) query.set(key, String(value));
    }
    const suffix = query.size > 0 ? `?${query}` : '';
    return this.request<CapturesResponse>('GET', `/captures${suffix}`);
  }

  async plan(
    waypoints: Waypoint[],
    overrides: PlannerOverrides = {},
  ): Promise<PlanResponse> {
    return this.request<PlanResponse>('POST', '/plan', {
      waypoints,
      ...overrides,
    });
  }

  async createSession(req: SessionRequest): Promise<SessionResponse> {
    return this.request<SessionResponse>('POST', '/sessions', req);
  }

  async stepSession(sessionId: string): Promise<StepResponse> {
    return this.request<StepResponse>(
      'POST',
      `/sessions/${encodeURIComponent(sessionId)}/step`,
    );
  }

  async getSession(sessionId: string): Promise<SessionResponse> {
    return this.request<SessionResponse>(
      'GET',
      `/sessions/${encodeURIComponent(sessionId)}`,
    );
  }

  frameUrl(sessionId: string, frameIndex: number): string {
    return `${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}` +
      `/frames/${frameIndex}`;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined
        ? undefined
        : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      const errorBody = (await response.json()) as ErrorBody;
      throw new ApiError(response.status, errorBody);
    }
    return (await response.json()) as T;
  }
}
