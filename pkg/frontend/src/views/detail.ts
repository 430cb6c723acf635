/** Application details: weight bars (direction and length from the weight,
 * saturation from |criticality| relative to the application's largest,
 * red negative / blue positive), markup toggles, and the suggest-changes
 * edit mode with draggable bars that save or roll back. */

import { type Verdict } from "../api.js";
import { type PanelState, type Store } from "../store.js";

export interface DetailActions {
  judge: (verdict: Verdict, needsHuman: boolean) => void;
  enterEdit: () => void;
  drag: (name: string, value: number) => void;
  save: () => void;
  cancel: () => void;
}

export function renderDetail(
  root: HTMLElement,
  state: PanelState,
  store: Store,
  actions: DetailActions,
): void {
  root.innerHTML = "";
  // hidden until an application is selected
  if (!state.selectedId || !state.detail) {
    root.hidden = true;
    return;
  }
  root.hidden = false;
  const detail = state.detail;

  const heading = document.createElement("h2");
  heading.textContent = `Application ${detail.id}`;
  root.appendChild(heading);

  const summary = document.createElement("p");
  summary.dataset.field = "summary";
  summary.textContent =
    `${detail.decision} with ${(detail.confidence * 100).toFixed(1)}% confidence`;
  root.appendChild(summary);

  const markup = document.createElement("div");
  markup.className = "markup-buttons";
  const mkButton = (label: string, verdict: Verdict, action: string) => {
    const button = document.createElement("button");
    button.textContent = label;
    button.dataset.action = action;
    button.addEventListener("click", () =>
      actions.judge(verdict, detail.needs_human),
    );
    markup.appendChild(button);
  };
  mkButton("Fair", "fair", "judge-fair");
  mkButton("Unfair", "unfair", "judge-unfair");
  mkButton("Clear", "cleared", "judge-clear");
  const needsHuman = document.createElement("button");
  needsHuman.dataset.action = "needs-human";
  needsHuman.textContent = detail.needs_human
    ? "Needs human: yes"
    : "Needs human: no";
  needsHuman.addEventListener("click", () =>
    actions.judge(detail.judgment ?? "cleared", !detail.needs_human),
  );
  markup.appendChild(needsHuman);
  const current = document.createElement("span");
  current.dataset.field = "judgment";
  current.textContent = detail.judgment ?? "unmarked";
  markup.appendChild(current);
  root.appendChild(markup);

  const controls = document.createElement("div");
  controls.className = "edit-controls";
  if (!state.editMode) {
    const suggest = document.createElement("button");
    suggest.dataset.action = "suggest-changes";
    suggest.textContent = "Suggest changes";
    suggest.addEventListener("click", () => actions.enterEdit());
    controls.appendChild(suggest);
  } else {
    const save = document.createElement("button");
    save.dataset.action = "save-edits";
    save.textContent = "Save";
    save.addEventListener("click", () => actions.save());
    const cancel = document.createElement("button");
    cancel.dataset.action = "cancel-edits";
    cancel.textContent = "Cancel";
    cancel.addEventListener("click", () => actions.cancel());
    controls.appendChild(save);
    controls.appendChild(cancel);
  }
  root.appendChild(controls);

  if (state.lastError) {
    const error = document.createElement("p");
    error.className = "inline-error";
    error.textContent = state.lastError;
    root.appendChild(error);
  }

  const [boundLo, boundHi] = detail.slider_bounds;
  const maxCriticality = Math.max(
    1e-12,
    ...detail.attributes.map((a) => Math.abs(a.criticality)),
  );
  const barScale = Math.max(Math.abs(boundLo), Math.abs(boundHi), 1e-12);

  const table = document.createElement("table");
  table.className = "weight-table";
  for (const attribute of detail.attributes) {
    const row = document.createElement("tr");
    row.dataset.attribute = attribute.name;

    const nameCell = document.createElement("td");
    nameCell.textContent = attribute.name;
    nameCell.title = `${attribute.provenance}${attribute.sensitive ? " (sensitive)" : ""}`;
    row.appendChild(nameCell);

    const valueCell = document.createElement("td");
    valueCell.textContent = String(attribute.value);
    row.appendChild(valueCell);

    const weight = store.displayedWeight(attribute.name);
    const barCell = document.createElement("td");
    barCell.className = "bar-cell";
    const bar = document.createElement("div");
    bar.className = `weight-bar ${weight < 0 ? "negative" : "positive"}`;
    bar.style.width = `${(Math.abs(weight) / barScale) * 100}%`;
    const saturation = Math.abs(attribute.criticality) / maxCriticality;
    bar.style.opacity = String(0.25 + 0.75 * saturation);
    bar.dataset.weight = weight.toFixed(6);
    bar.dataset.criticality = attribute.criticality.toFixed(6);
    barCell.appendChild(bar);
    row.appendChild(barCell);

    if (state.editMode) {
      const dragCell = document.createElement("td");
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(boundLo);
      slider.max = String(boundHi);
      slider.step = "any";
      slider.value = String(weight);
      slider.dataset.drag = attribute.name;
      slider.addEventListener("input", () =>
        actions.drag(attribute.name, Number(slider.value)),
      );
      dragCell.appendChild(slider);
      row.appendChild(dragCell);
    }
    table.appendChild(row);
  }
  root.appendChild(table);
}
