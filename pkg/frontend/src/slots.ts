// Lease-window arithmetic for the scheduler view: ten-minute slots over
// a browsing window, shaded by the cached lease table so the user picks
// from visibly free ranges. Pure functions, shared with tests.

import type { LeaseBody } from "./types";
import type { StoredDoc } from "./store";

export const SLOT_MINUTES = 10;

export interface Slot {
  start: Date;
  end: Date;
  // component ids busy during any part of the slot
  busy: Set<string>;
}

export function slotGrid(
  leases: StoredDoc<LeaseBody>[],
  windowStart: Date,
  slotCount: number,
): Slot[] {
  const slots: Slot[] = [];
  for (let k = 0; k < slotCount; k++) {
    const start = new Date(windowStart.getTime() + k * SLOT_MINUTES * 60_000);
    const end = new Date(start.getTime() + SLOT_MINUTES * 60_000);
    const busy = new Set<string>();
    for (const lease of leases) {
      const ls = Date.parse(lease.body.start_time);
      const le = Date.parse(lease.body.end_time);
      if (ls < end.getTime() && start.getTime() < le) {
        for (const cid of lease.body.components) busy.add(cid);
      }
    }
    slots.push({ start, end, busy });
  }
  return slots;
}

export function windowIsFree(
  slots: Slot[],
  componentId: string,
  fromIndex: number,
  slotSpan: number,
): boolean {
  if (fromIndex < 0 || fromIndex + slotSpan > slots.length) return false;
  for (let k = fromIndex; k < fromIndex + slotSpan; k++) {
    if (slots[k].busy.has(componentId)) return false;
  }
  return true;
}

export function isoMinute(date: Date): string {
  return date.toISOString().replace(/\.\d{3}Z$/, "Z");
}

// First slot boundary at least `leadMinutes` ahead of `now`.
export function nextSlotBoundary(now: Date, leadMinutes: number): Date {
  const lead = new Date(now.getTime() + leadMinutes * 60_000);
  const ms = SLOT_MINUTES * 60_000;
  return new Date(Math.ceil(lead.getTime() / ms) * ms);
}
