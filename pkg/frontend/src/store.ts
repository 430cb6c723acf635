/**
 * Panel state machine. Detail and comparison panels exist only while an
 * application is selected; edit-mode weight adjustments live in a local
 * overlay that save submits and cancel discards.
 *
 * Event discipline: filter, sort, select and compare actions emit exactly
 * one interaction event each; judgments and weight suggestions are logged
 * by their own endpoints, so the store does not double-log them.
 */

import {
  type ApplicationDetail,
  type AppListItem,
  type CompareResponse,
  type ModelInfo,
  type Order,
  type OverviewCounts,
  type SimilarResponse,
  type SortKey,
  type Verdict,
  type WorkbenchApi,
} from "./api.js";

export interface PanelState {
  connection: "ok" | "degraded";
  lastError: string | null;
  overview: OverviewCounts | null;
  modelInfo: ModelInfo | null;
  applications: AppListItem[];
  total: number;
  sort: SortKey;
  order: Order;
  filter: string;
  selectedId: string | null;
  detail: ApplicationDetail | null;
  similar: SimilarResponse | null;
  similarityRange: [number, number];
  comparison: CompareResponse | null;
  editMode: boolean;
  pendingWeights: Record<string, number>;
}

export type Listener = (state: PanelState) => void;

const clamp = (v: number, lo: number, hi: number) =>
  Math.min(hi, Math.max(lo, v));

export class Store {
  private readonly api: WorkbenchApi;
  private readonly listeners = new Set<Listener>();
  readonly state: PanelState = {
    connection: "ok",
    lastError: null,
    overview: null,
    modelInfo: null,
    applications: [],
    total: 0,
    sort: "id",
    order: "asc",
    filter: "",
    selectedId: null,
    detail: null,
    similar: null,
    similarityRange: [0, 1],
    comparison: null,
    editMode: false,
    pendingWeights: {},
  };

  constructor(api: WorkbenchApi) {
    this.api = api;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private fail(error: unknown): void {
    this.state.lastError = error instanceof Error ? error.message : String(error);
    this.notify();
  }

  /** Create a session and load the always-visible panels. */
  async init(country: string, preRating?: number): Promise<void> {
    try {
      await this.api.createSession(country, preRating);
      this.state.modelInfo = await this.api.model();
      this.state.overview = await this.api.overview();
      await this.reloadApplications();
      this.state.connection = "ok";
      this.state.lastError = null;
    } catch (error) {
      this.state.connection = "degraded";
      this.fail(error);
      return;
    }
    this.notify();
  }

  /** Degraded-state affordance: try the failed initial loads again. */
  async retry(country: string): Promise<void> {
    await this.init(country);
  }

  private async reloadApplications(): Promise<void> {
    const page = await this.api.applications(
      this.state.sort,
      this.state.order,
      this.state.filter,
    );
    this.state.applications = page.items;
    this.state.total = page.total;
  }

  async setSort(sort: SortKey, order: Order): Promise<void> {
    this.state.sort = sort;
    this.state.order = order;
    try {
      await this.api.logEvent("sort", { key: sort, order });
      await this.reloadApplications();
    } catch (error) {
      this.fail(error);
      return;
    }
    this.notify();
  }

  async setFilter(filter: string): Promise<void> {
    const previous = this.state.filter;
    this.state.filter = filter;
    try {
      await this.api.logEvent("filter", { filter });
      await this.reloadApplications();
      this.state.lastError = null;
    } catch (error) {
      this.state.filter = previous; // keep the last working query
      this.fail(error);
      return;
    }
    this.notify();
  }

  async selectApplication(id: string): Promise<void> {
    try {
      await this.api.logEvent("select_application", { application_id: id });
      const detail = await this.api.detail(id);
      const [lo, hi] = this.state.similarityRange;
      const similar = await this.api.similar(id, lo, hi);
      this.state.selectedId = id;
      this.state.detail = detail;
      this.state.similar = similar;
      this.state.comparison = null;
      this.state.editMode = false;
      this.state.pendingWeights = {};
    } catch (error) {
      this.fail(error);
      return;
    }
    this.notify();
  }

  clearSelection(): void {
    this.state.selectedId = null;
    this.state.detail = null;
    this.state.similar = null;
    this.state.comparison = null;
    this.state.editMode = false;
    this.state.pendingWeights = {};
    this.notify();
  }

  /** Optimistic markup: counters move immediately, then reconcile with the
   * service's authoritative counts (reverting on failure). */
  async judge(verdict: Verdict, needsHuman = false): Promise<void> {
    const id = this.state.selectedId;
    const detail = this.state.detail;
    if (!id || !detail || !this.state.overview) return;
    const snapshotCounts = { ...this.state.overview };
    const snapshotMarkup = {
      judgment: detail.judgment,
      needs_human: detail.needs_human,
    };
    const previous = detail.judgment;
    if (previous === "fair") this.state.overview.judged_fair -= 1;
    if (previous === "unfair") this.state.overview.judged_unfair -= 1;
    if (verdict === "fair") this.state.overview.judged_fair += 1;
    if (verdict === "unfair") this.state.overview.judged_unfair += 1;
    detail.judgment = verdict === "cleared" ? null : verdict;
    detail.needs_human = needsHuman;
    this.syncListMarkup(id, detail.judgment, needsHuman);
    this.notify();
    try {
      this.state.overview = await this.api.judge(id, verdict, needsHuman);
      this.state.lastError = null;
    } catch (error) {
      this.state.overview = snapshotCounts;
      detail.judgment = snapshotMarkup.judgment;
      detail.needs_human = snapshotMarkup.needs_human;
      this.syncListMarkup(id, detail.judgment, detail.needs_human);
      this.fail(error);
      return;
    }
    this.notify();
  }

  private syncListMarkup(
    id: string,
    judgment: "fair" | "unfair" | null,
    needsHuman: boolean,
  ): void {
    const row = this.state.applications.find((item) => item.id === id);
    if (row) {
      row.judgment = judgment;
      row.needs_human = needsHuman;
    }
  }

  enterEditMode(): void {
    if (!this.state.detail) return;
    this.state.editMode = true;
    this.state.pendingWeights = {};
    this.notify();
  }

  /** Drag handler: values clamp to the service-declared slider bounds. */
  dragWeight(name: string, value: number): void {
    const detail = this.state.detail;
    if (!detail || !this.state.editMode) return;
    const [lo, hi] = detail.slider_bounds;
    this.state.pendingWeights[name] = clamp(value, lo, hi);
    this.notify();
  }

  /** The weight a bar should display: pending edit or the model's value. */
  displayedWeight(name: string): number {
    const detail = this.state.detail;
    if (!detail) return 0;
    if (this.state.editMode && name in this.state.pendingWeights) {
      return this.state.pendingWeights[name];
    }
    const attribute = detail.attributes.find((a) => a.name === name);
    return attribute ? attribute.weight : 0;
  }

  /** Cancel is the reversibility guarantee: local edits vanish. */
  cancelEdits(): void {
    this.state.pendingWeights = {};
    this.state.editMode = false;
    this.notify();
  }

  /** Save posts only the touched attributes; on failure the edits stay so
   * the user can retry. */
  async saveEdits(): Promise<void> {
    const id = this.state.selectedId;
    if (!id || !this.state.editMode) return;
    if (Object.keys(this.state.pendingWeights).length === 0) {
      this.cancelEdits();
      return;
    }
    try {
      await this.api.suggestWeights(id, { ...this.state.pendingWeights });
      this.state.pendingWeights = {};
      this.state.editMode = false;
      this.state.lastError = null;
    } catch (error) {
      this.fail(error); // edits retained
      return;
    }
    this.notify();
  }

  async setSimilarityRange(lo: number, hi: number): Promise<void> {
    lo = clamp(lo, 0, 1);
    hi = clamp(hi, 0, 1);
    if (lo > hi) [lo, hi] = [hi, lo];
    this.state.similarityRange = [lo, hi];
    const id = this.state.selectedId;
    if (!id) {
      this.notify();
      return;
    }
    try {
      await this.api.logEvent("filter", { similarity_range: [lo, hi] });
      this.state.similar = await this.api.similar(id, lo, hi);
    } catch (error) {
      this.fail(error);
      return;
    }
    this.notify();
  }

  /** Clicking a grayed-out point is a no-op; in-range points load the
   * side-by-side comparison. */
  async compareWith(otherId: string): Promise<void> {
    const id = this.state.selectedId;
    const similar = this.state.similar;
    if (!id || !similar) return;
    const point = similar.items.find((item) => item.id === otherId);
    if (!point || !point.selectable) return;
    try {
      await this.api.logEvent("compare", { a: id, b: otherId });
      this.state.comparison = await this.api.compare(id, otherId);
    } catch (error) {
      this.fail(error);
      return;
    }
    this.notify();
  }
}
