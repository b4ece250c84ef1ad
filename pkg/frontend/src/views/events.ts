// Event feed: every event this user submitted, with live status,
// duration, and error details. No silent spinners: a submitted action
// is visible here until it terminates.

import { dataTable, section, statusBadge } from "../components";
import type { AppContext } from "../context";
import { listDocs } from "../store";
import type { EventBody } from "../types";

export function renderEvents(ctx: AppContext): HTMLElement {
  const root = document.createElement("div");
  const mine = listDocs<EventBody>(ctx.state, "events")
    .filter((doc) => doc.body.actor === ctx.user)
    .sort((a, b) => (a.body.created_at < b.body.created_at ? 1 : -1));
  const table = dataTable(mine, [
    { label: "event", render: (b) => b.event_id.slice(0, 8) },
    { label: "type", render: (b) => b.type },
    { label: "status", render: (b) => statusBadge(b.status) },
    { label: "attempts", render: (b) => String(b.attempts) },
    {
      label: "duration",
      render: (b) =>
        b.finished_at && b.created_at
          ? `${Math.max(0, Date.parse(fix(b.finished_at)) - Date.parse(fix(b.created_at)))} ms`
          : "…",
    },
    { label: "error", render: (b) => (b.error ? `${b.error.code}: ${b.error.message}` : "") },
  ]);
  root.appendChild(section("My events", table));
  return root;
}

function fix(ts: string): string {
  // microsecond timestamps parse once truncated to milliseconds
  return ts.replace(/(\.\d{3})\d*Z$/, "$1Z");
}
