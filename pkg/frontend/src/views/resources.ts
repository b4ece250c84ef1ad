// Resource browser: testbed/type/availability filters over the cached
// inventory, per-testbed node counts, and a coordinate scatter of the
// stored node locations.

import { notice, section } from "../components";
import type { AppContext } from "../context";
import type { Page, ResourceBody } from "../types";

function scatterPlot(resources: ResourceBody[]): HTMLElement {
  const located = resources.filter((r) => r.latitude !== null && r.longitude !== null);
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("viewBox", "0 0 400 200");
  svg.setAttribute("class", "map");
  if (!located.length) return svg as unknown as HTMLElement;
  const lats = located.map((r) => r.latitude as number);
  const lons = located.map((r) => r.longitude as number);
  const [minLat, maxLat] = [Math.min(...lats), Math.max(...lats)];
  const [minLon, maxLon] = [Math.min(...lons), Math.max(...lons)];
  const spanLat = Math.max(maxLat - minLat, 1e-6);
  const spanLon = Math.max(maxLon - minLon, 1e-6);
  for (const resource of located) {
    const dot = document.createElementNS(svgNS, "circle");
    const x = 10 + (380 * ((resource.longitude as number) - minLon)) / spanLon;
    const y = 190 - 180 * (((resource.latitude as number) - minLat) / spanLat);
    dot.setAttribute("cx", x.toFixed(1));
    dot.setAttribute("cy", y.toFixed(1));
    dot.setAttribute("r", "2.5");
    dot.setAttribute("class", resource.available ? "dot dot-free" : "dot dot-busy");
    const title = document.createElementNS(svgNS, "title");
    title.textContent = `${resource.name} (${resource.resource_type})`;
    dot.appendChild(title);
    svg.appendChild(dot);
  }
  return svg as unknown as HTMLElement;
}

export function renderResources(ctx: AppContext): HTMLElement {
  const root = document.createElement("div");

  const counts = document.createElement("div");
  counts.className = "testbed-counts";
  for (const testbed of ctx.testbeds) {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent = `${testbed.name}: ${testbed.node_count} nodes`;
    chip.title = testbed.description;
    counts.appendChild(chip);
  }
  root.appendChild(section("Testbeds", counts));

  const controls = document.createElement("div");
  controls.className = "filters";
  const testbedSelect = document.createElement("select");
  for (const testbed of ctx.testbeds) {
    const option = document.createElement("option");
    option.value = testbed.name;
    option.textContent = testbed.name;
    testbedSelect.appendChild(option);
  }
  const typeInput = document.createElement("input");
  typeInput.placeholder = "type (wifi, sensor, …)";
  const availableOnly = document.createElement("input");
  availableOnly.type = "checkbox";
  const availableLabel = document.createElement("label");
  availableLabel.append(availableOnly, "available only");
  controls.append(testbedSelect, typeInput, availableLabel);

  const results = document.createElement("div");

  async function load() {
    const params: Record<string, string | number | boolean> = {
      testbed: testbedSelect.value,
      limit: 200,
    };
    if (typeInput.value.trim()) params.type = typeInput.value.trim();
    if (availableOnly.checked) params.available = true;
    let page: Page<ResourceBody>;
    try {
      page = await ctx.api.resources(params);
    } catch (error) {
      results.replaceChildren(notice(String(error), "error"));
      return;
    }
    const bodies = page.items.map((item) => item.body);
    const list = document.createElement("ul");
    list.className = "node-list";
    for (const body of bodies.slice(0, 60)) {
      const item = document.createElement("li");
      item.textContent =
        `${body.name} [${body.resource_type}]` +
        (body.exclusive ? " exclusive" : " shared") +
        (body.available ? "" : " (unavailable)");
      list.appendChild(item);
    }
    const summary = document.createElement("p");
    summary.textContent = `${page.total} nodes match; showing ${Math.min(60, bodies.length)}`;
    results.replaceChildren(summary, scatterPlot(bodies), list);
  }

  for (const element of [testbedSelect, typeInput, availableLabel]) {
    element.addEventListener("change", () => void load());
  }
  if (ctx.testbeds.length) void load();
  root.appendChild(section("Browse nodes", controls, results));
  return root;
}
