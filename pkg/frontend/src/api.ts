// Typed REST client for the broker gateway. Every non-2xx answer is a
// PortalApiError carrying the wire error body {code, message, event_id?}.

import type {
  ApiErrorBody,
  DocEnvelope,
  EventBody,
  LeaseBody,
  Page,
  ProjectBody,
  ResourceBody,
  SliceBody,
  TestbedInfo,
} from "./types";

export class PortalApiError extends Error {
  status: number;
  code: string;
  eventId?: string;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.name = "PortalApiError";
    this.status = status;
    this.code = body.code;
    this.eventId = body.event_id;
  }
}

export interface Accepted {
  event_id: string;
}

type FetchLike = typeof fetch;

export class PortalApi {
  readonly baseUrl: string;
  token: string | null = null;
  private fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    params?: Record<string, string | number | boolean>,
  ): Promise<T> {
    let url = `${this.baseUrl}/api/v1${path}`;
    if (params && Object.keys(params).length) {
      const query = new URLSearchParams();
      for (const [key, value] of Object.entries(params)) query.set(key, String(value));
      url += `?${query}`;
    }
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(url, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new PortalApiError(response.status, payload as ApiErrorBody);
    }
    return payload as T;
  }

  // -- auth --------------------------------------------------------------

  async register(hrn: string, email: string): Promise<Accepted> {
    return this.request("POST", "/auth/register", { hrn, email });
  }

  async login(hrn: string): Promise<string> {
    const result = await this.request<{ token: string }>("POST", "/auth/login", { hrn });
    this.token = result.token;
    return result.token;
  }

  // -- reads --------------------------------------------------------------

  async testbeds(): Promise<TestbedInfo[]> {
    const result = await this.request<{ items: TestbedInfo[] }>("GET", "/testbeds");
    return result.items;
  }

  async resources(
    params: { testbed?: string; type?: string; available?: boolean; limit?: number; offset?: number } = {},
  ): Promise<Page<ResourceBody>> {
    return this.request("GET", "/resources", undefined, params as Record<string, string | number | boolean>);
  }

  async leases(params: { testbed?: string; slice?: string } = {}): Promise<Page<LeaseBody>> {
    return this.request("GET", "/leases", undefined, params as Record<string, string>);
  }

  async projects(member?: string): Promise<DocEnvelope<ProjectBody>[]> {
    const params = member ? { member } : undefined;
    const result = await this.request<{ items: DocEnvelope<ProjectBody>[] }>(
      "GET", "/projects", undefined, params,
    );
    return result.items;
  }

  async slices(project?: string): Promise<DocEnvelope<SliceBody>[]> {
    const params = project ? { project } : undefined;
    const result = await this.request<{ items: DocEnvelope<SliceBody>[] }>(
      "GET", "/slices", undefined, params,
    );
    return result.items;
  }

  async event(eventId: string): Promise<DocEnvelope<EventBody>> {
    return this.request("GET", `/events/${eventId}`);
  }

  async status(): Promise<{ sync: DocEnvelope[]; queues: Record<string, { pending: number; running: number }> }> {
    return this.request("GET", "/status");
  }

  // -- mutations (all answer 202 + event id) -------------------------------

  async createProject(hrn: string): Promise<Accepted> {
    return this.request("POST", "/projects", { hrn });
  }

  async createSlice(hrn: string): Promise<Accepted> {
    return this.request("POST", "/slices", { hrn });
  }

  async deleteSlice(hrn: string): Promise<Accepted> {
    return this.request("DELETE", `/slices/${hrn}`);
  }

  async createLease(lease: {
    slice_hrn: string;
    testbed: string;
    component_ids: string[];
    start_time: string;
    end_time: string;
  }): Promise<Accepted> {
    return this.request("POST", "/leases", lease);
  }

  async deleteLease(leaseId: string): Promise<Accepted> {
    return this.request("DELETE", `/leases/${leaseId}`);
  }

  async waitEvent(eventId: string, timeoutMs = 30000, pollMs = 250): Promise<EventBody> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const envelope = await this.event(eventId);
      if (envelope.body.status === "success" || envelope.body.status === "error") {
        return envelope.body;
      }
      if (Date.now() >= deadline) throw new Error(`event ${eventId} still ${envelope.body.status}`);
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }
}
