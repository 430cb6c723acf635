import { beforeEach, describe, expect, it } from "vitest";

import { Store } from "../src/store.js";
import { FakeApi } from "./fake_api.js";

let api: FakeApi;
let store: Store;

beforeEach(async () => {
  api = new FakeApi();
  store = new Store(api);
  await store.init("United Kingdom", 4);
});

describe("initialization", () => {
  it("loads overview, model and applications", () => {
    expect(store.state.overview?.accepted).toBe(2);
    expect(store.state.overview?.judged_fair).toBe(0);
    expect(store.state.modelInfo?.attributes.length).toBe(2);
    expect(store.state.applications.length).toBe(4);
    expect(store.state.connection).toBe("ok");
  });

  it("degrades visibly when the service is unreachable and recovers on retry", async () => {
    const offlineApi = new FakeApi();
    offlineApi.offline = true;
    const s = new Store(offlineApi);
    await s.init("UK");
    expect(s.state.connection).toBe("degraded");
    offlineApi.offline = false;
    await s.retry("UK");
    expect(s.state.connection).toBe("ok");
    expect(s.state.overview).not.toBeNull();
  });
});

describe("selection state machine", () => {
  it("hides detail and comparison until a selection exists", () => {
    expect(store.state.selectedId).toBeNull();
    expect(store.state.detail).toBeNull();
    expect(store.state.similar).toBeNull();
  });

  it("reveals detail and similar data on selection", async () => {
    await store.selectApplication("A2");
    expect(store.state.selectedId).toBe("A2");
    expect(store.state.detail?.id).toBe("A2");
    expect(store.state.similar?.items.length).toBe(3);
  });

  it("clears edit state when switching applications", async () => {
    await store.selectApplication("A1");
    store.enterEditMode();
    store.dragWeight("income", 0.4);
    await store.selectApplication("A2");
    expect(store.state.editMode).toBe(false);
    expect(store.state.pendingWeights).toEqual({});
  });
});

describe("judgment markup", () => {
  it("updates counters optimistically and reconciles with the service", async () => {
    await store.selectApplication("A1");
    await store.judge("unfair");
    expect(store.state.overview?.judged_unfair).toBe(1);
    expect(store.state.detail?.judgment).toBe("unfair");
    expect(api.judgments.get("A1")?.verdict).toBe("unfair");
  });

  it("re-marking replaces instead of double counting", async () => {
    await store.selectApplication("A1");
    await store.judge("fair");
    await store.judge("unfair");
    expect(store.state.overview?.judged_fair).toBe(0);
    expect(store.state.overview?.judged_unfair).toBe(1);
  });

  it("reverts the optimistic update when the write fails", async () => {
    await store.selectApplication("A1");
    api.failNextJudgment = true;
    await store.judge("fair");
    expect(store.state.overview?.judged_fair).toBe(0);
    expect(store.state.detail?.judgment).toBeNull();
    expect(store.state.lastError).toContain("judgment write failed");
  });
});

describe("suggest-changes mode", () => {
  beforeEach(async () => {
    await store.selectApplication("A3");
  });

  it("drags clamp to the slider bounds", () => {
    store.enterEditMode();
    store.dragWeight("nationality", 99);
    expect(store.state.pendingWeights.nationality).toBe(2);
    store.dragWeight("nationality", -99);
    expect(store.state.pendingWeights.nationality).toBe(-2);
  });

  it("cancel discards local edits and leaves the model untouched", async () => {
    store.enterEditMode();
    store.dragWeight("nationality", 0);
    expect(store.displayedWeight("nationality")).toBe(0);
    store.cancelEdits();
    expect(store.state.editMode).toBe(false);
    expect(store.state.pendingWeights).toEqual({});
    expect(store.displayedWeight("nationality")).toBe(-0.8);
    expect(api.suggestions.length).toBe(0);
  });

  it("save posts only the touched attributes", async () => {
    store.enterEditMode();
    store.dragWeight("nationality", 0);
    await store.saveEdits();
    expect(api.suggestions).toEqual([
      { id: "A3", weights: { nationality: 0 } },
    ]);
    expect(store.state.editMode).toBe(false);
  });

  it("keeps edits when the save fails so the user can retry", async () => {
    store.enterEditMode();
    store.dragWeight("nationality", 0.5);
    api.failNextSuggestion = true;
    await store.saveEdits();
    expect(store.state.editMode).toBe(true);
    expect(store.state.pendingWeights).toEqual({ nationality: 0.5 });
    expect(store.state.lastError).toContain("suggestion write failed");
    await store.saveEdits();
    expect(api.suggestions.length).toBe(1);
  });
});

describe("similarity range and comparison", () => {
  beforeEach(async () => {
    await store.selectApplication("A1");
  });

  it("clamps the range into [0, 1] and reorders inverted bounds", async () => {
    await store.setSimilarityRange(1.4, -0.2);
    expect(store.state.similarityRange).toEqual([0, 1]);
  });

  it("grays out-of-range points and refuses to compare against them", async () => {
    await store.setSimilarityRange(0.6, 1.0);
    const items = store.state.similar!.items;
    expect(items.find((i) => i.id === "A2")!.selectable).toBe(true);
    expect(items.find((i) => i.id === "A4")!.selectable).toBe(false);
    await store.compareWith("A4"); // unselectable: no-op
    expect(store.state.comparison).toBeNull();
    await store.compareWith("A2");
    expect(store.state.comparison?.b).toBe("A2");
  });
});

describe("interaction event discipline", () => {
  it("emits exactly one event per logged action kind", async () => {
    await store.setSort("confidence", "desc");
    await store.setFilter("decision=rejected");
    await store.selectApplication("A2");
    await store.compareWith("A3");
    const kinds = api.events.map((e) => e.kind);
    expect(kinds.filter((k) => k === "sort").length).toBe(1);
    // filter twice: the text filter and the similarity-range filter count
    expect(kinds.filter((k) => k === "filter").length).toBe(1);
    expect(kinds.filter((k) => k === "select_application").length).toBe(1);
    expect(kinds.filter((k) => k === "compare").length).toBe(1);
  });

  it("judgments and suggestions are not double-logged as interactions", async () => {
    await store.selectApplication("A1");
    await store.judge("unfair");
    store.enterEditMode();
    store.dragWeight("income", 0.2);
    await store.saveEdits();
    const kinds = api.events.map((e) => e.kind);
    expect(kinds).not.toContain("judgment");
    expect(kinds).not.toContain("suggestion");
  });

  it("a failed filter keeps the previous working query", async () => {
    await store.setFilter("decision=rejected");
    expect(store.state.applications.length).toBe(2);
    await store.setFilter("bogus");
    expect(store.state.filter).toBe("decision=rejected");
    expect(store.state.lastError).toContain("cannot parse filter");
  });
});
