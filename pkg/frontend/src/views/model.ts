/** How-the-algorithm-works panel: collapsible explanation, importance
 * circles sized by |w|/max|w|, and 5-bin stacked value distributions
 * (green accepted, yellow rejected). */

import { type ModelAttribute } from "../api.js";
import { type PanelState } from "../store.js";

export interface ModelPanelActions {
  sortByImportance: () => void;
}

let sortedByImportance = false;

export function modelPanelSortState(): boolean {
  return sortedByImportance;
}

export function toggleModelPanelSort(): void {
  sortedByImportance = !sortedByImportance;
}

export function resetModelPanelSort(): void {
  sortedByImportance = false;
}

export function orderedAttributes(state: PanelState): ModelAttribute[] {
  if (!state.modelInfo) return [];
  const attributes = [...state.modelInfo.attributes];
  if (sortedByImportance) {
    attributes.sort((a, b) => b.importance - a.importance || (a.name < b.name ? -1 : 1));
  }
  return attributes;
}

export function renderModelPanel(
  root: HTMLElement,
  state: PanelState,
  actions: ModelPanelActions,
): void {
  root.innerHTML = "";
  const heading = document.createElement("h2");
  heading.textContent = "How Our Algorithm Works";
  root.appendChild(heading);
  if (!state.modelInfo) return;

  const explanation = document.createElement("details");
  explanation.className = "algorithm";
  const summary = document.createElement("summary");
  summary.textContent = "What the score means";
  explanation.appendChild(summary);
  const text = document.createElement("p");
  text.textContent = state.modelInfo.algorithm;
  explanation.appendChild(text);
  root.appendChild(explanation);

  const sortButton = document.createElement("button");
  sortButton.dataset.action = "sort-importance";
  sortButton.textContent = sortedByImportance
    ? "Original order"
    : "Sort by importance";
  sortButton.addEventListener("click", () => actions.sortByImportance());
  root.appendChild(sortButton);

  const table = document.createElement("table");
  table.className = "attribute-table";
  for (const attribute of orderedAttributes(state)) {
    const row = document.createElement("tr");
    row.dataset.attribute = attribute.name;

    const nameCell = document.createElement("td");
    nameCell.textContent = attribute.name;
    nameCell.title = attribute.provenance;
    row.appendChild(nameCell);

    const circleCell = document.createElement("td");
    const circle = document.createElement("span");
    circle.className = "importance-circle";
    const diameter = 4 + 14 * attribute.importance;
    circle.style.width = `${diameter}px`;
    circle.style.height = `${diameter}px`;
    circle.dataset.importance = attribute.importance.toFixed(6);
    circleCell.appendChild(circle);
    row.appendChild(circleCell);

    const barCell = document.createElement("td");
    const bar = document.createElement("div");
    bar.className = "stacked-bar";
    for (const bin of attribute.distribution.bins) {
      const accepted = document.createElement("span");
      accepted.className = "segment accepted";
      accepted.style.width = `${bin.accepted_pct}%`;
      const rejected = document.createElement("span");
      rejected.className = "segment rejected";
      rejected.style.width = `${bin.rejected_pct}%`;
      bar.appendChild(accepted);
      bar.appendChild(rejected);
    }
    barCell.appendChild(bar);
    row.appendChild(barCell);
    table.appendChild(row);
  }
  root.appendChild(table);
}
