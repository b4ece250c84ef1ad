// Wire types mirroring the gateway's REST and WebSocket contract.

export interface DocEnvelope<T = Record<string, unknown>> {
  id: string;
  version: number;
  seq: number;
  updated_at: string;
  body: T;
}

export interface ChangeFrame<T = Record<string, unknown>> {
  type: "change";
  seq: number;
  collection: string;
  id: string;
  version: number;
  deleted: boolean;
  body: T;
}

export type ServerFrame = ChangeFrame | { type: "ping" } | { type: "resync" };

export type EventStatus = "pending" | "running" | "success" | "error";

export interface EventBody {
  event_id: string;
  type: string;
  payload: Record<string, unknown>;
  status: EventStatus;
  attempts: number;
  created_at: string;
  started_at: string | null;
  finished_at: string | null;
  error: { code: string; message: string; retriable: boolean } | null;
  result: Record<string, unknown> | null;
  actor: string;
  queue: string;
}

export interface ResourceBody {
  component_id: string;
  testbed: string;
  name: string;
  resource_type: string;
  exclusive: boolean;
  available: boolean;
  latitude: number | null;
  longitude: number | null;
}

export interface LeaseBody {
  lease_id: string;
  slice: string | null;
  testbed: string;
  components: string[];
  start_time: string;
  end_time: string;
  status: string;
}

export interface ProjectBody {
  hrn: string;
  authority: string;
  members: string[];
  created_at: string | null;
}

export interface SliceBody {
  hrn: string;
  project: string;
  members: string[];
  created_at: string | null;
}

export interface TestbedInfo {
  name: string;
  description: string;
  node_count: number;
  resource_types: string[];
}

export interface Page<T> {
  items: DocEnvelope<T>[];
  total: number;
  limit: number;
  offset: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  event_id?: string;
}
