/** Comparison panel: scatterplot of every application against the selected
 * one (x = prediction confidence, y = similarity; green accepted, yellow
 * rejected). Points outside the similarity range are grayed out and
 * unselectable; clicking an in-range point opens the side-by-side
 * attribute comparison. */

import { type PanelState } from "../store.js";

export interface ComparisonActions {
  setRange: (lo: number, hi: number) => void;
  compareWith: (id: string) => void;
}

const WIDTH = 360;
const HEIGHT = 240;

export function renderComparison(
  root: HTMLElement,
  state: PanelState,
  actions: ComparisonActions,
): void {
  root.innerHTML = "";
  if (!state.selectedId || !state.similar) {
    root.hidden = true;
    return;
  }
  root.hidden = false;

  const heading = document.createElement("h2");
  heading.textContent = `Compare ${state.selectedId} to similar applications`;
  root.appendChild(heading);

  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "scatter");
  for (const item of state.similar.items) {
    const point = document.createElementNS(
      "http://www.w3.org/2000/svg",
      "circle",
    );
    point.setAttribute("cx", String(10 + item.confidence * (WIDTH - 20)));
    point.setAttribute("cy", String(HEIGHT - 10 - item.similarity * (HEIGHT - 20)));
    point.setAttribute("r", "3");
    const cls = item.selectable
      ? item.decision === "accepted"
        ? "point accepted"
        : "point rejected"
      : "point grayed";
    point.setAttribute("class", cls);
    point.dataset.id = item.id;
    point.dataset.selectable = String(item.selectable);
    point.addEventListener("click", () => {
      if (item.selectable) actions.compareWith(item.id);
    });
    svg.appendChild(point);
  }
  root.appendChild(svg);

  const [lo, hi] = state.similarityRange;
  const rangeBox = document.createElement("div");
  rangeBox.className = "range-controls";
  const label = document.createElement("span");
  label.dataset.field = "range";
  label.textContent = `similarity ${lo.toFixed(2)} .. ${hi.toFixed(2)}`;
  const loInput = document.createElement("input");
  loInput.type = "range";
  loInput.min = "0";
  loInput.max = "1";
  loInput.step = "0.01";
  loInput.value = String(lo);
  loInput.dataset.control = "range-lo";
  const hiInput = document.createElement("input");
  hiInput.type = "range";
  hiInput.min = "0";
  hiInput.max = "1";
  hiInput.step = "0.01";
  hiInput.value = String(hi);
  hiInput.dataset.control = "range-hi";
  const apply = () =>
    actions.setRange(Number(loInput.value), Number(hiInput.value));
  loInput.addEventListener("change", apply);
  hiInput.addEventListener("change", apply);
  rangeBox.appendChild(label);
  rangeBox.appendChild(loInput);
  rangeBox.appendChild(hiInput);
  root.appendChild(rangeBox);

  if (state.comparison) {
    const table = document.createElement("table");
    table.className = "comparison-table";
    const header = document.createElement("tr");
    for (const text of [
      "attribute",
      state.comparison.a,
      state.comparison.b,
      "similarity",
    ]) {
      const cell = document.createElement("th");
      cell.textContent = text;
      header.appendChild(cell);
    }
    table.appendChild(header);
    for (const attribute of state.comparison.attributes) {
      const row = document.createElement("tr");
      row.dataset.attribute = attribute.name;
      const cells = [
        attribute.name,
        String(attribute.a_value),
        String(attribute.b_value),
        attribute.similarity.toFixed(4),
      ];
      for (const text of cells) {
        const cell = document.createElement("td");
        cell.textContent = text;
        row.appendChild(cell);
      }
      table.appendChild(row);
    }
    const total = document.createElement("p");
    total.dataset.field = "overall-similarity";
    total.textContent = `overall similarity ${state.comparison.similarity.toFixed(4)}`;
    root.appendChild(table);
    root.appendChild(total);
  }
}
