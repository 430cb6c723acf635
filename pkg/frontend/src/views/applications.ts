/** Applications overview: filterable, sortable list with decision,
 * confidence (percentage plus pie glyph) and the user's markup. */

import { type Order, type SortKey } from "../api.js";
import { type PanelState } from "../store.js";

export interface ApplicationsActions {
  setSort: (sort: SortKey, order: Order) => void;
  setFilter: (filter: string) => void;
  select: (id: string) => void;
}

const SORT_KEYS: SortKey[] = ["id", "decision", "confidence", "judgment"];

export function confidencePie(confidence: number): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 20 20");
  svg.setAttribute("class", "pie");
  const background = document.createElementNS(
    "http://www.w3.org/2000/svg",
    "circle",
  );
  background.setAttribute("cx", "10");
  background.setAttribute("cy", "10");
  background.setAttribute("r", "8");
  background.setAttribute("class", "pie-rest");
  const slice = document.createElementNS(
    "http://www.w3.org/2000/svg",
    "circle",
  );
  slice.setAttribute("cx", "10");
  slice.setAttribute("cy", "10");
  slice.setAttribute("r", "4");
  const circumference = 2 * Math.PI * 4;
  slice.setAttribute("stroke-dasharray",
    `${circumference * confidence} ${circumference}`);
  slice.setAttribute("class", "pie-slice");
  svg.appendChild(background);
  svg.appendChild(slice);
  return svg;
}

export function renderApplications(
  root: HTMLElement,
  state: PanelState,
  actions: ApplicationsActions,
): void {
  root.innerHTML = "";
  const heading = document.createElement("h2");
  heading.textContent = `Applications (${state.total})`;
  root.appendChild(heading);

  const toolbar = document.createElement("div");
  toolbar.className = "toolbar";

  const sortSelect = document.createElement("select");
  sortSelect.dataset.control = "sort";
  for (const key of SORT_KEYS) {
    const option = document.createElement("option");
    option.value = key;
    option.textContent = `Sort by ${key}`;
    option.selected = key === state.sort;
    sortSelect.appendChild(option);
  }
  sortSelect.addEventListener("change", () =>
    actions.setSort(sortSelect.value as SortKey, state.order),
  );
  toolbar.appendChild(sortSelect);

  const orderButton = document.createElement("button");
  orderButton.dataset.control = "order";
  orderButton.textContent = state.order === "asc" ? "Ascending" : "Descending";
  orderButton.addEventListener("click", () =>
    actions.setSort(state.sort, state.order === "asc" ? "desc" : "asc"),
  );
  toolbar.appendChild(orderButton);

  const filterInput = document.createElement("input");
  filterInput.dataset.control = "filter";
  filterInput.placeholder = "e.g. nationality=foreign,age>40";
  filterInput.value = state.filter;
  const filterButton = document.createElement("button");
  filterButton.dataset.control = "apply-filter";
  filterButton.textContent = "Filter";
  filterButton.addEventListener("click", () =>
    actions.setFilter(filterInput.value),
  );
  toolbar.appendChild(filterInput);
  toolbar.appendChild(filterButton);
  root.appendChild(toolbar);

  if (state.lastError) {
    const error = document.createElement("p");
    error.className = "inline-error";
    error.textContent = state.lastError;
    root.appendChild(error);
  }

  const table = document.createElement("table");
  table.className = "application-list";
  for (const item of state.applications) {
    const row = document.createElement("tr");
    row.dataset.id = item.id;
    if (item.id === state.selectedId) row.classList.add("selected");

    const idCell = document.createElement("td");
    idCell.textContent = item.id;
    const decisionCell = document.createElement("td");
    decisionCell.textContent = item.decision;
    decisionCell.className = item.decision;
    const confidenceCell = document.createElement("td");
    confidenceCell.textContent = `${(item.confidence * 100).toFixed(1)}%`;
    confidenceCell.appendChild(confidencePie(item.confidence));
    const markupCell = document.createElement("td");
    markupCell.className = "markup";
    markupCell.textContent = [
      item.judgment ?? "",
      item.needs_human ? "needs human" : "",
    ]
      .filter(Boolean)
      .join(", ");

    row.appendChild(idCell);
    row.appendChild(decisionCell);
    row.appendChild(confidenceCell);
    row.appendChild(markupCell);
    row.addEventListener("click", () => actions.select(item.id));
    table.appendChild(row);
  }
  root.appendChild(table);
}
