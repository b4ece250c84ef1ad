// Application shell: tab navigation, the client store fed by REST
// bootstrap plus the change stream, and re-rendering on every frame.

import { PortalApi } from "./api";
import { notice } from "./components";
import type { AppContext } from "./context";
import { PortalSocket } from "./socket";
import {
  StoreState,
  applyBootstrap,
  applyFrame,
  emptyState,
  trackPending,
} from "./store";
import type { TestbedInfo } from "./types";
import { renderEvents } from "./views/events";
import { renderLeases } from "./views/leases";
import { renderProjects } from "./views/projects";
import { renderRegister } from "./views/register";
import { renderResources } from "./views/resources";

const LIVE_COLLECTIONS = ["events", "projects", "slices", "leases"];

type ViewName = "account" | "projects" | "resources" | "leases" | "events";

const VIEWS: { name: ViewName; label: string }[] = [
  { name: "account", label: "Account" },
  { name: "projects", label: "Projects & Slices" },
  { name: "resources", label: "Resources" },
  { name: "leases", label: "Leases" },
  { name: "events", label: "Events" },
];

class App implements AppContext {
  api: PortalApi;
  state: StoreState = emptyState();
  testbeds: TestbedInfo[] = [];
  user: string | null = null;
  private socket: PortalSocket | null = null;
  private active: ViewName = "account";
  private outlet: HTMLElement;
  private nav: HTMLElement;
  private wsBadge: HTMLElement;
  private renderQueued = false;

  constructor(root: HTMLElement, baseUrl: string) {
    this.api = new PortalApi(baseUrl);
    this.nav = document.createElement("nav");
    this.outlet = document.createElement("main");
    this.wsBadge = document.createElement("span");
    this.wsBadge.className = "ws-state";
    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = "Federation Portal";
    header.append(title, this.wsBadge);
    root.append(header, this.nav, this.outlet);
    this.renderNav();
    this.render();
  }

  // -- AppContext -------------------------------------------------------------

  async submit(label: string, action: () => Promise<{ event_id: string }>,
               feedback?: HTMLElement): Promise<void> {
    try {
      const accepted = await action();
      this.state = trackPending(this.state, accepted.event_id, label);
      this.render();
    } catch (error) {
      if (feedback) feedback.replaceChildren(notice(String(error), "error"));
      else console.error(label, error);
    }
  }

  async startSession(user: string): Promise<void> {
    this.user = user;
    this.state = emptyState();
    this.testbeds = await this.api.testbeds();
    await this.bootstrap();
    this.connectSocket();
    this.active = "projects";
    this.renderNav();
    this.render();
  }

  // -- store plumbing ------------------------------------------------------------

  private async bootstrap(): Promise<void> {
    const [projects, slices, leases] = await Promise.all([
      this.api.projects(),
      this.api.slices(),
      this.api.leases(),
    ]);
    let state = this.state;
    state = applyBootstrap(state, "projects", projects);
    state = applyBootstrap(state, "slices", slices);
    state = applyBootstrap(state, "leases", leases.items);
    this.state = state;
  }

  private connectSocket(): void {
    if (!this.api.token) return;
    this.socket?.close();
    this.socket = new PortalSocket(this.api.baseUrl, this.api.token, LIVE_COLLECTIONS, {
      onChange: (frame) => {
        this.state = applyFrame(this.state, frame);
        this.render();
      },
      onResync: () => {
        void this.bootstrap().then(() => this.render());
      },
      onState: (socketState) => {
        this.wsBadge.textContent = socketState === "open" ? "live" : socketState;
        this.wsBadge.className = `ws-state ws-${socketState}`;
      },
      since: () => this.state.lastSeq,
    });
    this.socket.connect(this.state.lastSeq);
  }

  // -- rendering ------------------------------------------------------------

  private renderNav(): void {
    this.nav.replaceChildren();
    for (const view of VIEWS) {
      const button = document.createElement("button");
      button.textContent = view.label;
      button.disabled = view.name !== "account" && !this.user;
      button.className = view.name === this.active ? "tab tab-active" : "tab";
      button.addEventListener("click", () => {
        this.active = view.name;
        this.renderNav();
        this.render();
      });
      this.nav.appendChild(button);
    }
  }

  private render(): void {
    if (this.renderQueued) return;
    this.renderQueued = true;
    queueMicrotask(() => {
      this.renderQueued = false;
      this.outlet.replaceChildren(this.view());
    });
  }

  private view(): HTMLElement {
    switch (this.active) {
      case "account":
        return renderRegister(this);
      case "projects":
        return renderProjects(this);
      case "resources":
        return renderResources(this);
      case "leases":
        return renderLeases(this);
      case "events":
        return renderEvents(this);
    }
  }
}

export function mount(root: HTMLElement, baseUrl?: string): App {
  const url = baseUrl ?? (import.meta.env?.VITE_GATEWAY_URL as string | undefined)
    ?? "http://127.0.0.1:8080";
  return new App(root, url);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app") as HTMLElement);
}
