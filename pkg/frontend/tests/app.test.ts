// @vitest-environment jsdom
//
// Scripted browser run against recorded engine fixtures: load a version,
// click-select, rename round-trip, query heat overlay, diff wireframe.

import * as THREE from "three";
import { beforeEach, describe, expect, it } from "vitest";

import { SceneClient } from "../src/api.js";
import { App } from "../src/app.js";
import { DIFF_GROUP, missingWireframes, SCENE_MESH } from "../src/overlays.js";
import { makeMockService, MockService } from "./mock_service.js";

let service: MockService;
let app: App;
let panel: HTMLElement;
let scene: THREE.Scene;

function segmentItems(): HTMLElement[] {
  return [...panel.querySelectorAll<HTMLElement>(".segment-item")];
}

function itemByLabel(label: string): HTMLElement {
  const item = segmentItems().find(
    (li) => li.querySelector(".segment-label")?.textContent === label,
  );
  if (!item) throw new Error(`no panel row labeled '${label}'`);
  return item;
}

function sceneMesh(): THREE.Mesh {
  return scene.getObjectByName(SCENE_MESH) as THREE.Mesh;
}

function colorAt(vertex: number): [number, number, number] {
  const attr = sceneMesh().geometry.getAttribute("color") as THREE.BufferAttribute;
  return [attr.getX(vertex), attr.getY(vertex), attr.getZ(vertex)];
}

beforeEach(async () => {
  document.body.innerHTML = '<div id="panel"></div>';
  panel = document.getElementById("panel")!;
  scene = new THREE.Scene();
  service = makeMockService();
  app = new App(panel, new SceneClient("http://engine.test", service.fetchFn),
                { scene, requestRender: () => undefined }, 1);
  await app.start("default");
});

describe("load_version", () => {
  it("renders the mesh and fills the segment panel", () => {
    // start() loads the latest version (v2 of the fixture store)
    expect(app.state.activeVersion).toBe(2);
    const mesh = sceneMesh();
    expect(mesh).toBeDefined();
    const positions = mesh.geometry.getAttribute("position");
    expect(positions.count).toBe(app.mesh!.vertexCount);
    expect(segmentItems().length).toBe(service.inventories[2].segments.length);
  });

  it("loads another version from the version bar", async () => {
    const v1 = panel.querySelector<HTMLElement>('button[data-version="1"]')!;
    v1.click();
    await new Promise((r) => setTimeout(r, 5));
    expect(app.state.activeVersion).toBe(1);
    expect(itemByLabel("Joe's thermos")).toBeDefined();
  });

  it("keeps a stale version id non-fatal", async () => {
    await app.loadVersion(99);
    const toast = panel.querySelector(".error-toast");
    expect(toast?.textContent).toMatch(/unknown_version/);
    expect(app.state.activeVersion).toBe(2); // previous pane still loaded
    expect(sceneMesh()).toBeDefined();
  });
});

describe("act", () => {
  it("click-select highlights the row and the mesh", () => {
    const row = segmentItems()[1];
    const id = Number(row.dataset.segmentId);
    row.click();
    expect(app.state.selected).toEqual([id]);
    expect(
      segmentItems().find((li) => Number(li.dataset.segmentId) === id)!
        .classList.contains("selected"),
    ).toBe(true);
  });

  it("face picking resolves to the owning segment", () => {
    app.selectFromFace(0);
    expect(app.state.selected.length).toBe(1);
    expect(app.state.selected[0]).toBe(app.owner![app.mesh!.triangles[0]]);
  });

  it("rename round-trips through the service", async () => {
    const target = service.inventories[2].segments.find((s) => s.class_name !== "floor")!;
    itemByLabel(target.label).click();
    const input = panel.querySelector<HTMLInputElement>(".name-input")!;
    input.value = "Joe's thermos";
    panel.querySelector<HTMLButtonElement>(".rename-button")!.click();
    await new Promise((r) => setTimeout(r, 10));
    // service confirmed, inventory re-fetched, panel shows the new label + badge
    const row = itemByLabel("Joe's thermos");
    expect(row.querySelector(".badge.tracked")).not.toBeNull();
    const posts = service.requests.filter((r) => r.method === "POST");
    expect(posts[posts.length - 1].body).toEqual({
      action: "rename", segment_id: target.segment_id, name: "Joe's thermos",
    });
  });

  it("remember flips the tracked badge", async () => {
    const target = service.inventories[2].segments.find(
      (s) => s.class_name !== "floor" && !s.remembered,
    )!;
    itemByLabel(target.label).click();
    panel.querySelector<HTMLButtonElement>(".remember-button")!.click();
    await new Promise((r) => setTimeout(r, 10));
    expect(itemByLabel(target.label).querySelector(".badge.tracked")).not.toBeNull();
  });

  it("merge stays disabled below two selections", () => {
    const merge = () => panel.querySelector<HTMLButtonElement>(".merge-button")!;
    expect(merge().disabled).toBe(true);
    segmentItems()[0].click();
    expect(merge().disabled).toBe(true);
    segmentItems()[1].click();
    expect(merge().disabled).toBe(false);
  });

  it("failed action surfaces the service reason and recovers", async () => {
    await app.act({ action: "rename", segment_id: 424242, name: "x" });
    expect(panel.querySelector(".error-toast")?.textContent).toMatch(/unknown_segment/);
    expect(segmentItems().length).toBeGreaterThan(0); // inventory re-fetched
  });
});

describe("query_and_overlay", () => {
  it("blocks empty queries client-side", () => {
    const button = panel.querySelector<HTMLButtonElement>(".query-button")!;
    expect(button.disabled).toBe(true);
    button.click();
    expect(service.requests.some((r) => r.path.endsWith("/query"))).toBe(false);
  });

  it("renders the heatmap as vertex colors plus a ranked list", async () => {
    const before = colorAt(0);
    const input = panel.querySelector<HTMLInputElement>(".query-input")!;
    input.value = "bottle";
    input.dispatchEvent(new Event("input"));
    panel.querySelector<HTMLButtonElement>(".query-button")!.click();
    await new Promise((r) => setTimeout(r, 10));
    expect(app.state.heat).not.toBeNull();
    const after = colorAt(0);
    expect(after).not.toEqual(before);
    const ranked = panel.querySelectorAll(".ranked-item");
    expect(ranked.length).toBeGreaterThan(0);
    expect(ranked[0].textContent).toMatch(/bottle/);
  });
});

describe("diff_view", () => {
  it("draws one red hollow wireframe for the removed object", async () => {
    panel.querySelector<HTMLButtonElement>(".diff-button")!.click();
    await new Promise((r) => setTimeout(r, 10));
    const overlay = scene.getObjectByName(DIFF_GROUP)!;
    expect(overlay).toBeDefined();
    const missing = missingWireframes(overlay);
    expect(missing.length).toBe(1);
    expect(missing[0].userData.label).toBe("table:1");
    expect(panel.querySelector(".diff-missing")?.textContent).toBe("missing: table:1");
  });

  it("explains an untrained previous version instead of failing", async () => {
    await app.diffView(2, 1);
    expect(panel.querySelector(".error-toast")?.textContent).toMatch(/press train/);
  });
});

describe("training job", () => {
  it("polls the job to completion and reports accuracy", async () => {
    panel.querySelector<HTMLButtonElement>(".train-button")!.click();
    await new Promise((r) => setTimeout(r, 50));
    expect(service.jobPolls).toBeGreaterThanOrEqual(2);
    expect(panel.querySelector(".job-status.done")?.textContent).toMatch(/100.0%/);
  });
});
