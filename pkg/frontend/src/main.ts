/** Bootstrap: wire the store to the five panels. */

import { ApiClient } from "./api.js";
import { Store } from "./store.js";
import { renderApplications } from "./views/applications.js";
import { renderComparison } from "./views/comparison.js";
import { renderDetail } from "./views/detail.js";
import {
  renderModelPanel,
  toggleModelPanelSort,
} from "./views/model.js";
import { renderOverview } from "./views/overview.js";

export interface BootOptions {
  baseUrl: string;
  country: string;
  preRating?: number;
}

export function boot(root: HTMLElement, options: BootOptions): Store {
  const api = new ApiClient(options.baseUrl);
  const store = new Store(api);

  root.innerHTML = `
    <div class="layout">
      <section id="panel-overview" class="panel"></section>
      <section id="panel-model" class="panel"></section>
      <section id="panel-applications" class="panel"></section>
      <section id="panel-detail" class="panel" hidden></section>
      <section id="panel-comparison" class="panel" hidden></section>
    </div>`;
  const panels = {
    overview: root.querySelector<HTMLElement>("#panel-overview")!,
    model: root.querySelector<HTMLElement>("#panel-model")!,
    applications: root.querySelector<HTMLElement>("#panel-applications")!,
    detail: root.querySelector<HTMLElement>("#panel-detail")!,
    comparison: root.querySelector<HTMLElement>("#panel-comparison")!,
  };

  const render = () => {
    const state = store.state;
    renderOverview(panels.overview, state, {
      retry: () => void store.retry(options.country),
    });
    renderModelPanel(panels.model, state, {
      sortByImportance: () => {
        toggleModelPanelSort();
        // panel-level sorting is a logged interface setting like any other
        void api.logEvent("sort", { panel: "model", key: "importance" });
        render();
      },
    });
    renderApplications(panels.applications, state, {
      setSort: (sort, order) => void store.setSort(sort, order),
      setFilter: (filter) => void store.setFilter(filter),
      select: (id) => void store.selectApplication(id),
    });
    renderDetail(panels.detail, state, store, {
      judge: (verdict, needsHuman) => void store.judge(verdict, needsHuman),
      enterEdit: () => store.enterEditMode(),
      drag: (name, value) => store.dragWeight(name, value),
      save: () => void store.saveEdits(),
      cancel: () => store.cancelEdits(),
    });
    renderComparison(panels.comparison, state, {
      setRange: (lo, hi) => void store.setSimilarityRange(lo, hi),
      compareWith: (id) => void store.compareWith(id),
    });
  };

  store.subscribe(render);
  void store.init(options.country, options.preRating);
  return store;
}

declare global {
  interface Window {
    loanlensBoot?: typeof boot;
  }
}

if (typeof window !== "undefined") {
  window.loanlensBoot = boot;
}
