// Store purity and replay determinism: state must be a pure function of
// (bootstrap, ordered frames).

import { describe, expect, it } from "vitest";

import {
  applyBootstrap,
  applyFrame,
  emptyState,
  eventBody,
  fingerprint,
  getDoc,
  listDocs,
  pendingView,
  trackPending,
} from "../src/store";
import type { ChangeFrame, DocEnvelope } from "../src/types";

function frame(partial: Partial<ChangeFrame> & { seq: number; id: string }): ChangeFrame {
  return {
    type: "change",
    collection: "projects",
    version: 1,
    deleted: false,
    body: {},
    ...partial,
  };
}

function envelope(id: string, version: number, seq: number, body = {}): DocEnvelope {
  return { id, version, seq, updated_at: "2026-01-01T00:00:00Z", body };
}

describe("store reducer", () => {
  it("applies bootstrap then frames in order", () => {
    let state = emptyState();
    state = applyBootstrap(state, "projects", [envelope("p1", 1, 5, { hrn: "p1" })]);
    state = applyFrame(state, frame({ seq: 6, id: "p2", body: { hrn: "p2" } }));
    expect(listDocs(state, "projects").map((d) => d.id)).toEqual(["p1", "p2"]);
    expect(state.lastSeq).toBe(6);
  });

  it("is deterministic under replay", () => {
    const bootstrap = [envelope("a", 1, 1, { n: 1 }), envelope("b", 2, 4, { n: 4 })];
    const frames = [
      frame({ seq: 5, id: "a", version: 2, body: { n: 2 } }),
      frame({ seq: 6, id: "c", version: 1, body: { n: 9 } }),
      frame({ seq: 7, id: "b", version: 3, deleted: true, body: {} }),
      frame({ seq: 8, id: "a", version: 3, body: { n: 3 } }),
    ];
    const run = () => {
      let state = emptyState();
      state = applyBootstrap(state, "projects", bootstrap);
      for (const f of frames) state = applyFrame(state, f);
      return state;
    };
    expect(fingerprint(run())).toBe(fingerprint(run()));
    const state = run();
    expect(getDoc(state, "projects", "b")).toBeUndefined();
    expect(getDoc(state, "projects", "a")?.body).toEqual({ n: 3 });
  });

  it("ignores frames older than held versions", () => {
    let state = emptyState();
    state = applyBootstrap(state, "projects", [envelope("a", 3, 10, { n: 3 })]);
    state = applyFrame(state, frame({ seq: 4, id: "a", version: 2, body: { n: 2 } }));
    expect(getDoc(state, "projects", "a")?.body).toEqual({ n: 3 });
    expect(state.lastSeq).toBe(10);
  });

  it("a bootstrap racing the stream cannot regress state", () => {
    let state = emptyState();
    state = applyFrame(state, frame({ seq: 9, id: "a", version: 4, body: { n: 4 } }));
    state = applyBootstrap(state, "projects", [envelope("a", 3, 7, { n: 3 })]);
    expect(getDoc(state, "projects", "a")?.version).toBe(4);
  });

  it("deletion frames tombstone documents", () => {
    let state = emptyState();
    state = applyFrame(state, frame({ seq: 1, id: "a", version: 1 }));
    state = applyFrame(state, frame({ seq: 2, id: "a", version: 2, deleted: true }));
    expect(listDocs(state, "projects")).toEqual([]);
  });

  it("does not mutate prior states", () => {
    const before = applyFrame(emptyState(), frame({ seq: 1, id: "a", version: 1 }));
    const snapshot = fingerprint(before);
    applyFrame(before, frame({ seq: 2, id: "b", version: 1 }));
    applyFrame(before, frame({ seq: 2, id: "a", version: 2, deleted: true }));
    expect(fingerprint(before)).toBe(snapshot);
  });

  it("tracks pending events until their terminal frame arrives", () => {
    let state = emptyState();
    state = trackPending(state, "ev1", "project p1");
    expect(pendingView(state)[0].status).toBe("submitted");
    state = applyFrame(state, frame({
      seq: 1, id: "ev1", collection: "events", version: 1,
      body: {
        event_id: "ev1", type: "project.create", status: "pending", attempts: 0,
        created_at: "2026-01-01T00:00:00.000000Z", started_at: null,
        finished_at: null, error: null, result: null, actor: "u", queue: "registry",
        payload: {},
      },
    }));
    expect(pendingView(state)[0].status).toBe("pending");
    state = applyFrame(state, frame({
      seq: 2, id: "ev1", collection: "events", version: 3,
      body: {
        event_id: "ev1", type: "project.create", status: "error", attempts: 1,
        created_at: "2026-01-01T00:00:00.000000Z", started_at: "2026-01-01T00:00:00.100000Z",
        finished_at: "2026-01-01T00:00:01.400000Z",
        error: { code: "DuplicateHrn", message: "exists", retriable: false },
        result: null, actor: "u", queue: "registry", payload: {},
      },
    }));
    const view = pendingView(state)[0];
    expect(view.status).toBe("error");
    expect(view.error).toContain("DuplicateHrn");
    expect(view.durationMs).toBe(1400);
    expect(eventBody(state, "ev1")?.status).toBe("error");
  });
});
