// End-to-end portal flow against the real broker and simulators (spawned
// as a child Python process): register, create a project, reserve a
// node, watch each action's pending -> terminal transitions arrive over
// the WebSocket, then force a reconnect with `since` and check the
// replayed store equals a fresh REST bootstrap.

import { spawn, ChildProcess } from "node:child_process";
import { createInterface } from "node:readline";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { WebSocket as NodeWebSocket } from "ws";

import { PortalApi } from "../src/api";
import { PortalSocket } from "../src/socket";
import {
  StoreState,
  applyBootstrap,
  applyFrame,
  emptyState,
  eventBody,
  fingerprint,
  listDocs,
} from "../src/store";
import type { ChangeFrame, EventStatus } from "../src/types";

let stack: ChildProcess;
let baseUrl = "";

beforeAll(async () => {
  stack = spawn("python3", ["scripts/devstack.py"], {
    cwd: new URL("..", import.meta.url).pathname,
    stdio: ["pipe", "pipe", "inherit"],
  });
  baseUrl = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("devstack did not start")), 45000);
    createInterface({ input: stack.stdout! }).once("line", (line) => {
      clearTimeout(timer);
      resolve(JSON.parse(line).url);
    });
    stack.once("exit", (code) => reject(new Error(`devstack exited ${code}`)));
  });
}, 50000);

afterAll(() => {
  stack?.stdin?.end();
  stack?.kill();
});

class LiveStore {
  state: StoreState = emptyState();
  socket: PortalSocket;
  // Every status observed per event, in frame arrival order: transitions
  // are recorded as frames land, not sampled, so none can be missed.
  statusHistory = new Map<string, EventStatus[]>();

  constructor(api: PortalApi) {
    this.socket = new PortalSocket(
      baseUrl,
      api.token!,
      ["events", "projects", "slices", "leases"],
      {
        onChange: (frame: ChangeFrame) => this.absorb(frame),
        onResync: () => undefined,
        since: () => this.state.lastSeq,
      },
      { webSocketImpl: NodeWebSocket as unknown as typeof WebSocket, reconnectDelayMs: 200 },
    );
  }

  absorb(frame: ChangeFrame): void {
    this.state = applyFrame(this.state, frame);
    if (frame.collection === "events" && !frame.deleted) {
      const status = (frame.body as { status: EventStatus }).status;
      const history = this.statusHistory.get(frame.id) ?? [];
      if (history[history.length - 1] !== status) history.push(status);
      this.statusHistory.set(frame.id, history);
    }
  }

  async bootstrap(api: PortalApi): Promise<void> {
    this.state = applyBootstrap(this.state, "projects", await api.projects());
    this.state = applyBootstrap(this.state, "slices", await api.slices());
    this.state = applyBootstrap(this.state, "leases", (await api.leases()).items);
  }

  async waitEventStatuses(eventId: string, timeoutMs = 20000): Promise<EventStatus[]> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const body = eventBody(this.state, eventId);
      if (body && (body.status === "success" || body.status === "error")) {
        return this.statusHistory.get(eventId) ?? [body.status];
      }
      if (Date.now() > deadline) {
        throw new Error(`event ${eventId}: saw ${this.statusHistory.get(eventId)?.join(",")}`);
      }
      await sleep(25);
    }
  }
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

describe("portal demo flow against the live stack", () => {
  const suffix = Date.now() % 1000000;
  const user = `onelab.r2lab.e2e${suffix}`;
  const project = `onelab.r2lab.proj${suffix}`;
  const slice = `${project}.s1`;
  let api: PortalApi;
  let live: LiveStore;

  it("registers an account usable immediately", async () => {
    api = new PortalApi(baseUrl);
    const accepted = await api.register(user, `${user}@e2e.example`);
    const event = await api.waitEvent(accepted.event_id, 20000, 50);
    expect(event.status).toBe("success");
    await api.login(user);
    expect(api.token).toBeTruthy();
  }, 30000);

  it("streams pending -> running -> success transitions for a new project", async () => {
    live = new LiveStore(api);
    await live.bootstrap(api);
    live.socket.connect();
    await sleep(300); // allow subscribe to land before the mutation
    const accepted = await api.createProject(project);
    const statuses = await live.waitEventStatuses(accepted.event_id);
    expect(statuses[0]).toBe("pending");
    expect(statuses).toContain("running");
    expect(statuses[statuses.length - 1]).toBe("success");
    expect(listDocs(live.state, "projects").some((d) => d.id === project)).toBe(true);
  }, 30000);

  it("creates a slice and reserves a free node, watching the lease land", async () => {
    const sliceAccepted = await api.createSlice(slice);
    expect((await live.waitEventStatuses(sliceAccepted.event_id)).at(-1)).toBe("success");
    const page = await api.resources({ testbed: "r2lab", available: true, limit: 5 });
    const component = page.items[0].body.component_id;
    const start = new Date(Math.ceil((Date.now() + 5 * 60000) / 600000) * 600000);
    const end = new Date(start.getTime() + 30 * 60000);
    const leaseAccepted = await api.createLease({
      slice_hrn: slice,
      testbed: "r2lab",
      component_ids: [component],
      start_time: start.toISOString().replace(/\.\d{3}Z$/, "Z"),
      end_time: end.toISOString().replace(/\.\d{3}Z$/, "Z"),
    });
    const statuses = await live.waitEventStatuses(leaseAccepted.event_id);
    expect(statuses.at(-1)).toBe("success");
    // The immediate post-acceptance sync lands the lease in the cache,
    // and the change feed delivers it without any refetch.
    const deadline = Date.now() + 15000;
    for (;;) {
      if (listDocs(live.state, "leases").length > 0) break;
      if (Date.now() > deadline) throw new Error("lease never reached the live store");
      await sleep(50);
    }
    const held = listDocs(live.state, "leases")[0];
    expect(held.body.slice).toBe(slice);
    expect(held.body.status).toBe("accepted");

    // A conflicting reservation surfaces as the event's terminal error.
    const clash = await api.createLease({
      slice_hrn: slice,
      testbed: "r2lab",
      component_ids: [component],
      start_time: start.toISOString().replace(/\.\d{3}Z$/, "Z"),
      end_time: end.toISOString().replace(/\.\d{3}Z$/, "Z"),
    });
    const clashStatuses = await live.waitEventStatuses(clash.event_id);
    expect(clashStatuses.at(-1)).toBe("error");
    expect(eventBody(live.state, clash.event_id)?.error?.code).toBe("LeaseConflict");
  }, 45000);

  it("reconnecting with `since` replays exactly what a fresh bootstrap shows", async () => {
    // Drop the socket, mutate while offline, reconnect from the cursor.
    live.socket.close();
    const offline = await api.createProject(`${project}x`);
    await api.waitEvent(offline.event_id, 20000, 50);

    live.socket = new PortalSocket(
      baseUrl,
      api.token!,
      ["events", "projects", "slices", "leases"],
      {
        onChange: (frame) => live.absorb(frame),
        onResync: () => undefined,
        since: () => live.state.lastSeq,
      },
      { webSocketImpl: NodeWebSocket as unknown as typeof WebSocket },
    );
    live.socket.connect();
    const deadline = Date.now() + 15000;
    for (;;) {
      if (listDocs(live.state, "projects").some((d) => d.id === `${project}x`)) break;
      if (Date.now() > deadline) throw new Error("missed change not replayed");
      await sleep(50);
    }

    const freshApi = new PortalApi(baseUrl);
    await freshApi.login(user);
    let fresh = emptyState();
    fresh = applyBootstrap(fresh, "projects", await freshApi.projects());
    fresh = applyBootstrap(fresh, "slices", await freshApi.slices());
    fresh = applyBootstrap(fresh, "leases", (await freshApi.leases()).items);
    await sleep(300); // drain any straggler frames
    live.socket.close();
    expect(fingerprint(live.state, ["projects", "slices", "leases"]))
      .toBe(fingerprint(fresh, ["projects", "slices", "leases"]));
  }, 45000);
});
