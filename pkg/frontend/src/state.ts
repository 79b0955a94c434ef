// View state and its pure transitions. The UI never trusts local edits:
// every mutation round-trips through the service and re-fetches.

import type {
  DiffResponse,
  InventoryResponse,
  JobStatus,
  RankedSegment,
  VersionInfo,
} from "./api.js";

export interface ViewState {
  sceneId: string | null;
  versions: VersionInfo[];
  activeVersion: number | null;
  inventory: InventoryResponse | null;
  selected: number[];
  heat: number[] | null;
  ranked: RankedSegment[] | null;
  diff: DiffResponse | null;
  job: JobStatus | null;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    sceneId: null,
    versions: [],
    activeVersion: null,
    inventory: null,
    selected: [],
    heat: null,
    ranked: null,
    diff: null,
    job: null,
    error: null,
  };
}

export function segmentExists(state: ViewState, id: number): boolean {
  return !!state.inventory?.segments.some((s) => s.segment_id === id);
}

export function toggleSelect(state: ViewState, id: number): ViewState {
  if (!segmentExists(state, id)) {
    return { ...state, error: `segment ${id} is not in the loaded inventory` };
  }
  const selected = state.selected.includes(id)
    ? state.selected.filter((s) => s !== id)
    : [...state.selected, id];
  return { ...state, selected, error: null };
}

export function withInventory(state: ViewState, inventory: InventoryResponse): ViewState {
  const ids = new Set(inventory.segments.map((s) => s.segment_id));
  return {
    ...state,
    inventory,
    activeVersion: inventory.version_id,
    // selection must always point at segments that exist
    selected: state.selected.filter((id) => ids.has(id)),
  };
}

export function clearOverlays(state: ViewState): ViewState {
  return { ...state, heat: null, ranked: null, diff: null };
}

export function canMerge(state: ViewState): boolean {
  return state.selected.length >= 2;
}

export function canRename(state: ViewState): boolean {
  return state.selected.length === 1;
}

export function canRemember(state: ViewState): boolean {
  return state.selected.length >= 1;
}

export function canQuery(text: string): boolean {
  return text.trim().length > 0;
}
