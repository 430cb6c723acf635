/** System overview: the four counters, live after every judgment. */

import { type PanelState } from "../store.js";

export interface OverviewActions {
  retry: () => void;
}

export function renderOverview(
  root: HTMLElement,
  state: PanelState,
  actions: OverviewActions,
): void {
  root.innerHTML = "";
  const heading = document.createElement("h2");
  heading.textContent = "System Overview";
  root.appendChild(heading);

  if (state.connection === "degraded") {
    const warning = document.createElement("p");
    warning.className = "degraded";
    warning.textContent = "Cannot reach the decision service.";
    const button = document.createElement("button");
    button.textContent = "Retry";
    button.dataset.action = "retry";
    button.addEventListener("click", () => actions.retry());
    root.appendChild(warning);
    root.appendChild(button);
    return;
  }
  if (!state.overview) return;

  const counters: Array<[string, number, string]> = [
    ["Accepted", state.overview.accepted, "accepted"],
    ["Rejected", state.overview.rejected, "rejected"],
    ["Judged fair", state.overview.judged_fair, "judged-fair"],
    ["Judged unfair", state.overview.judged_unfair, "judged-unfair"],
  ];
  const list = document.createElement("dl");
  list.className = "counters";
  for (const [label, value, key] of counters) {
    const term = document.createElement("dt");
    term.textContent = label;
    const datum = document.createElement("dd");
    datum.textContent = String(value);
    datum.dataset.counter = key;
    list.appendChild(term);
    list.appendChild(datum);
  }
  root.appendChild(list);
}
