// Client-side document store.
//
// State is a pure function of (REST bootstrap, ordered change frames):
// applying the same inputs always reproduces the same state, which is
// what makes reconnect-and-replay safe. Frames carry a version; a frame
// older than the held document is ignored, so a bootstrap racing the
// stream cannot regress state.

import type { ChangeFrame, DocEnvelope, EventBody } from "./types";

export interface StoredDoc<T = Record<string, unknown>> {
  id: string;
  version: number;
  seq: number;
  body: T;
  deleted: boolean;
}

export interface PendingAction {
  eventId: string;
  label: string;
  submittedAt: string;
}

export interface StoreState {
  lastSeq: number;
  collections: Record<string, Record<string, StoredDoc>>;
  // Event ids this client submitted, newest last; statuses resolve from
  // the events collection as frames arrive.
  pending: PendingAction[];
}

export function emptyState(): StoreState {
  return { lastSeq: 0, collections: {}, pending: [] };
}

function withCollection(
  state: StoreState,
  collection: string,
  docs: Record<string, StoredDoc>,
): StoreState {
  return {
    ...state,
    collections: { ...state.collections, [collection]: docs },
  };
}

export function applyBootstrap<T>(
  state: StoreState,
  collection: string,
  envelopes: DocEnvelope<T>[],
): StoreState {
  const current = state.collections[collection] ?? {};
  const next: Record<string, StoredDoc> = { ...current };
  let lastSeq = state.lastSeq;
  for (const env of envelopes) {
    const held = next[env.id];
    if (held && held.version >= env.version) continue;
    next[env.id] = {
      id: env.id,
      version: env.version,
      seq: env.seq,
      body: env.body as Record<string, unknown>,
      deleted: false,
    };
    if (env.seq > lastSeq) lastSeq = env.seq;
  }
  return { ...withCollection(state, collection, next), lastSeq };
}

export function applyFrame(state: StoreState, frame: ChangeFrame): StoreState {
  const current = state.collections[frame.collection] ?? {};
  const held = current[frame.id];
  const lastSeq = Math.max(state.lastSeq, frame.seq);
  if (held && held.version >= frame.version) {
    return { ...state, lastSeq };
  }
  const next = { ...current };
  if (frame.deleted) {
    delete next[frame.id];
  } else {
    next[frame.id] = {
      id: frame.id,
      version: frame.version,
      seq: frame.seq,
      body: frame.body,
      deleted: false,
    };
  }
  return { ...withCollection(state, frame.collection, next), lastSeq };
}

export function trackPending(state: StoreState, eventId: string, label: string): StoreState {
  return {
    ...state,
    pending: [
      ...state.pending,
      { eventId, label, submittedAt: new Date().toISOString() },
    ],
  };
}

export function listDocs<T = Record<string, unknown>>(
  state: StoreState,
  collection: string,
): StoredDoc<T>[] {
  const docs = state.collections[collection] ?? {};
  return Object.values(docs).sort((a, b) =>
    a.id < b.id ? -1 : a.id > b.id ? 1 : 0,
  ) as StoredDoc<T>[];
}

export function getDoc<T = Record<string, unknown>>(
  state: StoreState,
  collection: string,
  id: string,
): StoredDoc<T> | undefined {
  return state.collections[collection]?.[id] as StoredDoc<T> | undefined;
}

export function eventBody(state: StoreState, eventId: string): EventBody | undefined {
  return getDoc<EventBody>(state, "events", eventId)?.body;
}

export interface PendingView extends PendingAction {
  status: string;
  error?: string;
  durationMs?: number;
}

export function pendingView(state: StoreState): PendingView[] {
  return state.pending.map((action) => {
    const body = eventBody(state, action.eventId);
    if (!body) return { ...action, status: "submitted" };
    const view: PendingView = { ...action, status: body.status };
    if (body.error) view.error = `${body.error.code}: ${body.error.message}`;
    if (body.finished_at && body.created_at) {
      view.durationMs =
        Date.parse(body.finished_at.replace(/(\.\d{3})\d*Z$/, "$1Z")) -
        Date.parse(body.created_at.replace(/(\.\d{3})\d*Z$/, "$1Z"));
    }
    return view;
  });
}

// Canonical rendering of store contents, used by tests to assert the
// replay-determinism invariant and WS-vs-REST equivalence.
export function fingerprint(state: StoreState, collections?: string[]): string {
  const names = (collections ?? Object.keys(state.collections)).sort();
  const shape = names.map((name) => [
    name,
    listDocs(state, name).map((d) => [d.id, d.version, d.body]),
  ]);
  return JSON.stringify(shape);
}
