// Lease scheduler: pick a slice, testbed, and component, then a start
// slot and duration on a ten-minute grid. A per-component timeline of
// the cached leases shades occupied slots so free windows are visible
// before submitting; conflicts still surface as the event's terminal
// error if someone wins the race.

import { form, notice, section } from "../components";
import type { AppContext } from "../context";
import { listDocs } from "../store";
import { SLOT_MINUTES, isoMinute, nextSlotBoundary, slotGrid } from "../slots";
import type { LeaseBody, SliceBody } from "../types";

const GRID_SLOTS = 36; // six hours of ten-minute slots

export function renderLeases(ctx: AppContext): HTMLElement {
  const root = document.createElement("div");
  const feedback = document.createElement("div");
  const slices = listDocs<SliceBody>(ctx.state, "slices");
  if (!slices.length) {
    root.appendChild(section("Schedule a reservation",
                             notice("create a slice first; leases attach to slices")));
    return root;
  }

  const leases = listDocs<LeaseBody>(ctx.state, "leases");
  const windowStart = nextSlotBoundary(new Date(), 5);
  const grid = slotGrid(leases, windowStart, GRID_SLOTS);

  const timeline = document.createElement("div");
  const timelineTable = document.createElement("table");
  timelineTable.className = "timeline";

  async function drawTimeline(testbed: string) {
    const page = await ctx.api.resources({ testbed, available: true, limit: 12 });
    const components = page.items
      .filter((item) => item.body.exclusive)
      .map((item) => item.body.component_id);
    timelineTable.replaceChildren();
    const head = timelineTable.insertRow();
    head.insertCell().textContent = "component";
    for (let k = 0; k < GRID_SLOTS; k += 6) {
      const cell = head.insertCell();
      cell.colSpan = 6;
      cell.textContent = grid[k].start.toISOString().slice(11, 16);
    }
    for (const cid of components) {
      const row = timelineTable.insertRow();
      row.insertCell().textContent = cid.split("+").pop() ?? cid;
      for (let k = 0; k < GRID_SLOTS; k++) {
        const cell = row.insertCell();
        cell.className = grid[k].busy.has(cid) ? "slot slot-busy" : "slot slot-free";
        cell.title = `${cid} ${grid[k].start.toISOString()}`;
      }
    }
  }

  const durations = [1, 3, 6, 12].map((n) => ({
    value: String(n * SLOT_MINUTES),
    label: `${n * SLOT_MINUTES} minutes`,
  }));
  const startOptions = grid.map((slot, index) => ({
    value: String(index),
    label: slot.start.toISOString().slice(11, 16),
  }));

  const leaseForm = form(
    [
      {
        name: "slice",
        label: "slice",
        kind: "select",
        options: slices.map((s) => ({ value: s.body.hrn, label: s.body.hrn })),
      },
      {
        name: "testbed",
        label: "testbed",
        kind: "select",
        options: ctx.testbeds.map((t) => ({ value: t.name, label: t.name })),
      },
      { name: "component", label: "component id", placeholder: "urn:publicid:IDN+r2lab+node+n0001" },
      { name: "slot", label: "start", kind: "select", options: startOptions },
      { name: "duration", label: "duration", kind: "select", options: durations },
    ],
    "reserve",
    (values) => {
      const slotIndex = Number(values.slot);
      const start = grid[slotIndex].start;
      const end = new Date(start.getTime() + Number(values.duration) * 60_000);
      void ctx.submit(
        `lease ${values.component} @ ${isoMinute(start)}`,
        () =>
          ctx.api.createLease({
            slice_hrn: values.slice,
            testbed: values.testbed,
            component_ids: [values.component],
            start_time: isoMinute(start),
            end_time: isoMinute(end),
          }),
        feedback,
      );
    },
  );

  const testbedSelect = leaseForm.elements.namedItem("testbed") as HTMLSelectElement;
  testbedSelect.addEventListener("change", () => void drawTimeline(testbedSelect.value));
  if (ctx.testbeds.length) void drawTimeline(ctx.testbeds[0].name);
  timeline.append(timelineTable);

  root.appendChild(section("Availability (next six hours)", timeline));
  root.appendChild(section("Schedule a reservation", leaseForm, feedback));

  const mine = listDocs<LeaseBody>(ctx.state, "leases");
  const list = document.createElement("ul");
  for (const lease of mine) {
    const item = document.createElement("li");
    item.textContent =
      `${lease.body.lease_id} ${lease.body.testbed} ` +
      `${lease.body.start_time} → ${lease.body.end_time} (${lease.body.status})`;
    const drop = document.createElement("button");
    drop.textContent = "delete";
    drop.addEventListener("click", () =>
      ctx.submit(`delete lease ${lease.body.lease_id}`,
                 () => ctx.api.deleteLease(lease.body.lease_id), feedback),
    );
    item.appendChild(drop);
    list.appendChild(item);
  }
  root.appendChild(section("Current leases", list));
  return root;
}
