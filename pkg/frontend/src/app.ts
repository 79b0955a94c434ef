// Application wiring: state transitions driven by service calls, a three.js
// scene fed from engine bytes, and the DOM panel. The renderer is injected so
// the whole app runs headlessly under tests.

import * as THREE from "three";

import { ApiError, SceneClient } from "./api.js";
import {
  assignVertices,
  buildDiffOverlay,
  buildSceneMesh,
  colorByClass,
  colorByHeat,
  DIFF_GROUP,
  pickSegment,
} from "./overlays.js";
import { PanelCallbacks, renderPanel } from "./panel.js";
import {
  clearOverlays,
  initialState,
  toggleSelect,
  ViewState,
  withInventory,
} from "./state.js";
import { parseVMesh, VMesh } from "./vmesh.js";

export interface RenderAdapter {
  scene: THREE.Scene;
  requestRender(): void;
}

export class App {
  state: ViewState = initialState();
  mesh: VMesh | null = null;
  sceneMesh: THREE.Mesh | null = null;
  owner: Int32Array | null = null;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly panelRoot: HTMLElement,
    private readonly client: SceneClient,
    private readonly adapter: RenderAdapter,
    private readonly pollIntervalMs = 1000,
  ) {}

  private callbacks(): PanelCallbacks {
    return {
      onSelect: (id) => this.select(id),
      onMerge: (name) => void this.act({ action: "merge", segment_ids: this.state.selected, name }),
      onRename: (name) => void this.act({ action: "rename", segment_id: this.state.selected[0], name }),
      onRemember: () => void this.rememberSelected(),
      onQuery: (text) => void this.query(text),
      onTrain: () => void this.train(),
      onDiff: (prev, curr) => void this.diffView(prev, curr),
      onLoadVersion: (v) => void this.loadVersion(v),
    };
  }

  private render(): void {
    renderPanel(this.panelRoot, this.state, this.callbacks());
    this.adapter.requestRender();
  }

  private fail(err: unknown): void {
    const message =
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    this.state = { ...this.state, error: message };
    this.render();
  }

  async start(sceneId: string): Promise<void> {
    try {
      const versions = await this.client.getVersions(sceneId);
      this.state = { ...this.state, sceneId, versions, error: null };
      if (versions.length) {
        await this.loadVersion(versions[versions.length - 1].version_id);
      } else {
        this.render();
      }
    } catch (err) {
      this.fail(err);
    }
  }

  async loadVersion(version: number): Promise<void> {
    try {
      const [inventory, meshBytes] = await Promise.all([
        this.client.getInventory(version),
        this.client.getMeshBytes(version),
      ]);
      this.mesh = parseVMesh(meshBytes);
      this.state = clearOverlays(withInventory({ ...this.state, error: null }, inventory));
      this.owner = assignVertices(this.mesh, inventory);

      const old = this.adapter.scene.getObjectByName(this.sceneMesh?.name ?? "");
      if (old) this.adapter.scene.remove(old);
      this.removeDiffOverlay();
      this.sceneMesh = buildSceneMesh(this.mesh);
      colorByClass(this.sceneMesh, this.mesh, this.state.selected, this.owner);
      this.adapter.scene.add(this.sceneMesh);
      this.render();
    } catch (err) {
      this.fail(err); // stale version ids and transport errors stay non-fatal
    }
  }

  select(segmentId: number): void {
    this.state = toggleSelect(this.state, segmentId);
    if (this.sceneMesh && this.mesh) {
      colorByClass(this.sceneMesh, this.mesh, this.state.selected, this.owner);
    }
    this.render();
  }

  /** Click-to-select from a raycast hit on the scene mesh. */
  selectFromFace(faceIndex: number): void {
    if (!this.mesh || !this.owner) return;
    const id = pickSegment(this.mesh, this.owner, faceIndex);
    if (id >= 0) this.select(id);
  }

  async act(action: Parameters<SceneClient["act"]>[1]): Promise<void> {
    if (this.state.activeVersion === null) return;
    const version = this.state.activeVersion;
    try {
      await this.client.act(version, action);
      // confirmed by the service: re-fetch rather than trusting local edits
      await this.loadVersion(version);
    } catch (err) {
      const message =
        err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      // revert any optimistic view state, then keep the rejection visible
      await this.loadVersion(version).catch(() => undefined);
      this.state = { ...this.state, error: message };
      this.render();
    }
  }

  private async rememberSelected(): Promise<void> {
    for (const id of [...this.state.selected]) {
      await this.act({ action: "remember", segment_id: id });
    }
  }

  async query(text: string): Promise<void> {
    if (this.state.activeVersion === null || !this.sceneMesh) return;
    try {
      const res = await this.client.query(this.state.activeVersion, text);
      this.state = { ...this.state, heat: res.heat, ranked: res.ranked, diff: null, error: null };
      this.removeDiffOverlay();
      colorByHeat(this.sceneMesh, res.heat);
      this.render();
    } catch (err) {
      this.fail(err);
    }
  }

  async diffView(prev: number, curr: number): Promise<void> {
    try {
      if (this.state.activeVersion !== curr) await this.loadVersion(curr);
      const diff = await this.client.diff(prev, curr);
      this.state = { ...this.state, diff, heat: null, ranked: null, error: null };
      this.removeDiffOverlay();
      if (this.sceneMesh && this.mesh) {
        colorByClass(this.sceneMesh, this.mesh, [], this.owner);
        this.adapter.scene.add(
          buildDiffOverlay(diff, this.sceneMesh, this.mesh, this.owner),
        );
      }
      this.render();
    } catch (err) {
      if (err instanceof ApiError && err.code === "no_model") {
        this.state = {
          ...this.state,
          error: "no trained model for the previous scan: personalize segments and press train",
        };
        this.render();
        return;
      }
      this.fail(err);
    }
  }

  async train(): Promise<void> {
    if (this.state.activeVersion === null) return;
    try {
      const jobId = await this.client.train(this.state.activeVersion);
      await this.pollJob(jobId);
    } catch (err) {
      this.fail(err);
    }
  }

  async pollJob(jobId: number): Promise<void> {
    const status = await this.client.getJob(jobId);
    this.state = { ...this.state, job: status, error: null };
    this.render();
    if (status.status === "running") {
      this.pollTimer = setTimeout(() => void this.pollJob(jobId), this.pollIntervalMs);
    }
  }

  dispose(): void {
    if (this.pollTimer) clearTimeout(this.pollTimer);
  }

  private removeDiffOverlay(): void {
    const overlay = this.adapter.scene.getObjectByName(DIFF_GROUP);
    if (overlay) this.adapter.scene.remove(overlay);
  }
}
