// Projects and slices: cached lists plus creation forms. Submissions
// answer immediately with an event id; the rows and the activity strip
// update as change frames arrive, never by blocking on the backend.

import { dataTable, form, notice, section, statusBadge } from "../components";
import type { AppContext } from "../context";
import { listDocs, pendingView } from "../store";
import type { ProjectBody, SliceBody } from "../types";

export function renderProjects(ctx: AppContext): HTMLElement {
  const root = document.createElement("div");
  const feedback = document.createElement("div");

  const activity = pendingView(ctx.state).slice(-4).reverse();
  if (activity.length) {
    const strip = document.createElement("div");
    strip.className = "activity";
    for (const entry of activity) {
      const line = document.createElement("div");
      line.appendChild(statusBadge(entry.status));
      line.appendChild(document.createTextNode(` ${entry.label}`));
      if (entry.error) line.appendChild(notice(entry.error, "error"));
      strip.appendChild(line);
    }
    root.appendChild(section("Recent activity", strip));
  }

  const projects = listDocs<ProjectBody>(ctx.state, "projects");
  const projectTable = dataTable(projects, [
    { label: "project", render: (b) => b.hrn },
    { label: "authority", render: (b) => b.authority },
    { label: "members", render: (b) => b.members.join(", ") },
  ]);
  const projectForm = form(
    [{ name: "hrn", label: "new project hrn", placeholder: "onelab.r2lab.myproj" }],
    "create project",
    (values) => ctx.submit(`project ${values.hrn}`, () => ctx.api.createProject(values.hrn), feedback),
  );
  root.appendChild(section("Projects", projectTable, projectForm));

  const slices = listDocs<SliceBody>(ctx.state, "slices");
  const sliceTable = dataTable(slices, [
    { label: "slice", render: (b) => b.hrn },
    { label: "project", render: (b) => b.project },
    {
      label: "",
      render: (b) => {
        const button = document.createElement("button");
        button.textContent = "delete";
        button.addEventListener("click", () =>
          ctx.submit(`delete slice ${b.hrn}`, () => ctx.api.deleteSlice(b.hrn), feedback),
        );
        return button;
      },
    },
  ]);
  const sliceForm = form(
    [{ name: "hrn", label: "new slice hrn", placeholder: "onelab.r2lab.myproj.s1" }],
    "create slice",
    (values) => ctx.submit(`slice ${values.hrn}`, () => ctx.api.createSlice(values.hrn), feedback),
  );
  root.appendChild(section("Slices", sliceTable, sliceForm));
  root.appendChild(feedback);
  return root;
}
