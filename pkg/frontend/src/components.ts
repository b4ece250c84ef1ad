// Generic, schema-parameterized building blocks shared by every view:
// the same table/form/badge code renders projects, slices, resources,
// leases, and events depending on the column and field specs passed in.

import type { StoredDoc } from "./store";

export interface ColumnSpec<T> {
  label: string;
  render: (body: T, doc: StoredDoc<T>) => string | HTMLElement;
}

export function dataTable<T>(docs: StoredDoc<T>[], columns: ColumnSpec<T>[]): HTMLElement {
  const table = document.createElement("table");
  table.className = "data";
  const head = table.createTHead().insertRow();
  for (const column of columns) {
    const th = document.createElement("th");
    th.textContent = column.label;
    head.appendChild(th);
  }
  const tbody = table.createTBody();
  for (const doc of docs) {
    const row = tbody.insertRow();
    row.dataset.id = doc.id;
    for (const column of columns) {
      const cell = row.insertCell();
      const value = column.render(doc.body, doc);
      if (typeof value === "string") cell.textContent = value;
      else cell.appendChild(value);
    }
  }
  if (!docs.length) {
    const row = tbody.insertRow();
    const cell = row.insertCell();
    cell.colSpan = columns.length;
    cell.className = "empty";
    cell.textContent = "nothing here yet";
  }
  return table;
}

export interface FieldSpec {
  name: string;
  label: string;
  placeholder?: string;
  kind?: "text" | "select" | "datetime";
  options?: { value: string; label: string }[];
  value?: string;
}

export function form(
  fields: FieldSpec[],
  submitLabel: string,
  onSubmit: (values: Record<string, string>) => void,
): HTMLFormElement {
  const element = document.createElement("form");
  element.className = "entry";
  for (const field of fields) {
    const wrap = document.createElement("label");
    wrap.textContent = field.label;
    let input: HTMLInputElement | HTMLSelectElement;
    if (field.kind === "select") {
      input = document.createElement("select");
      for (const option of field.options ?? []) {
        const el = document.createElement("option");
        el.value = option.value;
        el.textContent = option.label;
        input.appendChild(el);
      }
    } else {
      input = document.createElement("input");
      input.type = "text";
      if (field.placeholder) input.placeholder = field.placeholder;
    }
    input.name = field.name;
    if (field.value) input.value = field.value;
    wrap.appendChild(input);
    element.appendChild(wrap);
  }
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = submitLabel;
  element.appendChild(button);
  element.addEventListener("submit", (event) => {
    event.preventDefault();
    const values: Record<string, string> = {};
    for (const field of fields) {
      const input = element.elements.namedItem(field.name) as HTMLInputElement | HTMLSelectElement;
      values[field.name] = input.value.trim();
    }
    onSubmit(values);
  });
  return element;
}

export function statusBadge(status: string): HTMLElement {
  const span = document.createElement("span");
  span.className = `badge badge-${status}`;
  span.textContent = status;
  return span;
}

export function section(title: string, ...children: (HTMLElement | string)[]): HTMLElement {
  const card = document.createElement("section");
  card.className = "card";
  const heading = document.createElement("h2");
  heading.textContent = title;
  card.appendChild(heading);
  for (const child of children) {
    if (typeof child === "string") {
      const p = document.createElement("p");
      p.textContent = child;
      card.appendChild(p);
    } else {
      card.appendChild(child);
    }
  }
  return card;
}

export function notice(text: string, tone: "info" | "error" = "info"): HTMLElement {
  const div = document.createElement("div");
  div.className = `notice notice-${tone}`;
  div.textContent = text;
  return div;
}
