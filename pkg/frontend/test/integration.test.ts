/**
 * Scripted end-to-end session against the real service, driven through the
 * UI's own API client and store: select an application, mark it unfair,
 * drag one weight to zero and save, then confirm the fairness report and
 * overview reflect it; the cancel path must leave service state unchanged.
 *
 * Requires the Python package to be installed (the `loanlens` CLI builds
 * the artifacts and serves the API).
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Store } from "../src/store.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | undefined;

async function waitForServer(timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/model`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("service did not come up in time");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "loanlens-ui-"));
  execFileSync("loanlens", [
    "generate", "--synthetic-n", "400", "--seed", "0",
    "--out", join(workdir, "data"),
  ]);
  execFileSync("loanlens", [
    "train", "--dataset", join(workdir, "data", "applications.csv"),
    "--seed", "0", "--out", join(workdir, "model.json"),
  ]);
  server = spawn(
    "loanlens",
    [
      "serve",
      "--model", join(workdir, "model.json"),
      "--dataset", join(workdir, "data", "applications.csv"),
      "--log-dir", join(workdir, "logs"),
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 60000);

afterAll(() => {
  server?.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

describe("scripted session against the live service", () => {
  it("judgment and saved weight edit reach the fairness report; cancel does not", async () => {
    const api = new ApiClient(BASE);
    const store = new Store(api);
    await store.init("United Kingdom", 4);
    expect(store.state.connection).toBe("ok");
    expect(store.state.overview).not.toBeNull();
    const total =
      store.state.overview!.accepted + store.state.overview!.rejected;
    expect(total).toBe(store.state.total);

    // pick a rejected application so zeroing a negative weight can matter
    const rejected = store.state.applications.find(
      (item) => item.decision === "rejected",
    )!;
    await store.selectApplication(rejected.id);
    expect(store.state.detail?.id).toBe(rejected.id);

    // mark unfair: the overview counter increments server-side
    await store.judge("unfair");
    expect(store.state.overview?.judged_unfair).toBe(1);
    const overviewFromServer = await api.overview();
    expect(overviewFromServer.judged_unfair).toBe(1);

    // cancel path first: a drag that is discarded must not reach the service
    store.enterEditMode();
    store.dragWeight("nationality", 0.5);
    store.cancelEdits();
    let report = await api.fairnessReport("nationality");
    expect(report.suggestion_count).toBe(0);
    const detailBefore = await api.detail(rejected.id);
    const nationalityWeight = detailBefore.attributes.find(
      (a) => a.name === "nationality",
    )!.weight;
    expect(nationalityWeight).not.toBe(0.5);

    // now drag the nationality weight to zero and save
    store.enterEditMode();
    store.dragWeight("nationality", 0);
    await store.saveEdits();
    expect(store.state.lastError).toBeNull();
    report = await api.fairnessReport("nationality");
    expect(report.suggestion_count).toBe(1);
    expect(report.overridden_applications).toContain(rejected.id);
    expect(report.after.disparate_impact).toBeGreaterThanOrEqual(
      report.before.disparate_impact,
    );

    // the saved suggestion never mutates the model itself
    const detailAfter = await api.detail(rejected.id);
    expect(
      detailAfter.attributes.find((a) => a.name === "nationality")!.weight,
    ).toBe(nationalityWeight);
  }, 30000);

  it("interaction events land in the service log", async () => {
    const api = new ApiClient(BASE);
    const store = new Store(api);
    await store.init("Portugal");
    await store.setSort("confidence", "desc");
    const top = store.state.applications[0];
    await store.selectApplication(top.id);
    await store.setSimilarityRange(0.5, 1.0);
    // the service rejects unknown event kinds with 422, so reaching here
    // means every logged call was accepted; a bad kind must fail loudly
    await expect(
      api.logEvent("teleport" as never, {}),
    ).rejects.toMatchObject({ status: 422 });
  }, 30000);
});
