// DOM side panel: segment list, action forms, job + error status.
// Plain DOM, no framework; App re-renders after every confirmed state change.

import type { RankedSegment } from "./api.js";
import { classColor, cssColor } from "./colors.js";
import { canMerge, canQuery, canRemember, canRename, ViewState } from "./state.js";

export interface PanelCallbacks {
  onSelect(segmentId: number): void;
  onMerge(name: string): void;
  onRename(name: string): void;
  onRemember(): void;
  onQuery(text: string): void;
  onTrain(): void;
  onDiff(prev: number, curr: number): void;
  onLoadVersion(version: number): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderPanel(
  root: HTMLElement,
  state: ViewState,
  callbacks: PanelCallbacks,
): void {
  root.textContent = "";
  root.appendChild(renderVersionBar(state, callbacks));
  root.appendChild(renderSegmentList(state, callbacks));
  root.appendChild(renderActions(state, callbacks));
  root.appendChild(renderQuery(state, callbacks));
  root.appendChild(renderDiffControls(state, callbacks));
  root.appendChild(renderStatus(state));
}

function renderVersionBar(state: ViewState, callbacks: PanelCallbacks): HTMLElement {
  const bar = el("div", "version-bar");
  for (const v of state.versions) {
    const button = el("button", "version-button", `v${v.version_id}`);
    button.dataset.version = String(v.version_id);
    if (v.version_id === state.activeVersion) button.classList.add("active");
    button.addEventListener("click", () => callbacks.onLoadVersion(v.version_id));
    bar.appendChild(button);
  }
  return bar;
}

function renderSegmentList(state: ViewState, callbacks: PanelCallbacks): HTMLElement {
  const list = el("ul", "segment-list");
  if (!state.inventory) return list;
  for (const seg of state.inventory.segments) {
    const item = el("li", "segment-item");
    item.dataset.segmentId = String(seg.segment_id);
    if (state.selected.includes(seg.segment_id)) item.classList.add("selected");
    const chip = el("span", "class-chip", seg.class_name);
    chip.style.backgroundColor = cssColor(classColor(seg.class_id));
    item.appendChild(chip);
    item.appendChild(el("span", "segment-label", seg.label));
    if (seg.remembered) item.appendChild(el("span", "badge tracked", "tracked"));
    item.appendChild(el("span", "voxels", `${seg.voxel_count} vox`));
    item.addEventListener("click", () => callbacks.onSelect(seg.segment_id));
    list.appendChild(item);
  }
  return list;
}

function renderActions(state: ViewState, callbacks: PanelCallbacks): HTMLElement {
  const box = el("div", "actions");
  const nameInput = el("input", "name-input");
  nameInput.placeholder = "name";
  box.appendChild(nameInput);

  const rename = el("button", "rename-button", "rename");
  rename.disabled = !canRename(state);
  rename.addEventListener("click", () => {
    if (nameInput.value.trim()) callbacks.onRename(nameInput.value.trim());
  });
  box.appendChild(rename);

  const merge = el("button", "merge-button", "merge");
  merge.disabled = !canMerge(state);
  merge.addEventListener("click", () => {
    if (nameInput.value.trim()) callbacks.onMerge(nameInput.value.trim());
  });
  box.appendChild(merge);

  const remember = el("button", "remember-button", "remember");
  remember.disabled = !canRemember(state);
  remember.addEventListener("click", () => callbacks.onRemember());
  box.appendChild(remember);

  const train = el("button", "train-button", "train");
  train.disabled = state.job?.status === "running";
  train.addEventListener("click", () => callbacks.onTrain());
  box.appendChild(train);
  return box;
}

function renderQuery(state: ViewState, callbacks: PanelCallbacks): HTMLElement {
  const box = el("div", "query");
  const input = el("input", "query-input");
  input.placeholder = "search the space";
  const go = el("button", "query-button", "query");
  go.disabled = true;
  input.addEventListener("input", () => {
    go.disabled = !canQuery(input.value);
  });
  go.addEventListener("click", () => {
    if (canQuery(input.value)) callbacks.onQuery(input.value.trim());
  });
  box.appendChild(input);
  box.appendChild(go);
  if (state.ranked) box.appendChild(renderRanked(state.ranked));
  return box;
}

function renderRanked(ranked: RankedSegment[]): HTMLElement {
  const list = el("ol", "ranked-list");
  for (const r of ranked.slice(0, 8)) {
    const item = el("li", "ranked-item", `${r.label} (${r.mean_heat.toFixed(3)})`);
    item.dataset.segmentId = String(r.segment_id);
    list.appendChild(item);
  }
  return list;
}

function renderDiffControls(state: ViewState, callbacks: PanelCallbacks): HTMLElement {
  const box = el("div", "diff-controls");
  if (state.versions.length < 2) return box;
  const prev = el("button", "diff-button", "diff vs previous");
  prev.addEventListener("click", () => {
    const ids = state.versions.map((v) => v.version_id);
    const curr = state.activeVersion ?? ids[ids.length - 1];
    const before = ids.filter((id) => id < curr);
    if (before.length) callbacks.onDiff(before[before.length - 1], curr);
  });
  box.appendChild(prev);
  if (state.diff) {
    box.appendChild(
      el("div", "diff-summary",
         `${state.diff.unchanged.length} unchanged, ${state.diff.missing.length} missing`),
    );
    for (const m of state.diff.missing) {
      box.appendChild(el("div", "diff-missing", `missing: ${m.label}`));
    }
  }
  return box;
}

function renderStatus(state: ViewState): HTMLElement {
  const box = el("div", "status");
  if (state.error) {
    const toast = el("div", "error-toast", state.error);
    toast.setAttribute("role", "alert");
    box.appendChild(toast);
  }
  if (state.job) {
    const j = state.job;
    const line =
      j.status === "running"
        ? `training: epoch ${j.epoch}, accuracy ${(j.accuracy * 100).toFixed(1)}%`
        : j.status === "done"
          ? `trained: best accuracy ${(j.best_accuracy * 100).toFixed(1)}%`
          : `training failed: ${j.error ?? "unknown"}`;
    box.appendChild(el("div", `job-status ${j.status}`, line));
  }
  return box;
}
