// Shared shape every view receives: the current store snapshot, the API
// client, cached testbed metadata, and the submit helper that turns a
// mutation into a tracked pending event.

import type { PortalApi, Accepted } from "./api";
import type { StoreState } from "./store";
import type { TestbedInfo } from "./types";

export interface AppContext {
  api: PortalApi;
  state: StoreState;
  testbeds: TestbedInfo[];
  user: string | null;
  // POST a mutation, track its event id in the store, surface rejections
  // into `feedback` (pre-flight 4xx errors happen before any event exists).
  submit(
    label: string,
    action: () => Promise<Accepted>,
    feedback?: HTMLElement,
  ): Promise<void>;
  startSession(user: string): Promise<void>;
}
