import { describe, expect, it } from "vitest";

import type { InventoryResponse } from "../src/api.js";
import {
  canMerge,
  canQuery,
  canRename,
  initialState,
  toggleSelect,
  withInventory,
} from "../src/state.js";

function inventory(ids: number[]): InventoryResponse {
  return {
    version_id: 1,
    class_names: ["floor", "chair"],
    segments: ids.map((id) => ({
      segment_id: id,
      class_id: 1,
      class_name: "chair",
      auto_name: `chair:${id}`,
      user_name: null,
      label: `chair:${id}`,
      remembered: false,
      centroid: [0, 0, 0],
      voxel_count: 10,
    })),
  };
}

describe("selection", () => {
  it("toggles and validates against the inventory", () => {
    let state = withInventory(initialState(), inventory([1, 2, 3]));
    state = toggleSelect(state, 2);
    expect(state.selected).toEqual([2]);
    state = toggleSelect(state, 2);
    expect(state.selected).toEqual([]);
    state = toggleSelect(state, 99);
    expect(state.error).toMatch(/not in the loaded inventory/);
  });

  it("drops selections that vanish on re-fetch", () => {
    let state = withInventory(initialState(), inventory([1, 2, 3]));
    state = toggleSelect(toggleSelect(state, 1), 3);
    state = withInventory(state, inventory([1, 2]));
    expect(state.selected).toEqual([1]);
  });
});

describe("action arity", () => {
  it("merge needs two selections, rename exactly one", () => {
    let state = withInventory(initialState(), inventory([1, 2]));
    expect(canMerge(state)).toBe(false);
    state = toggleSelect(state, 1);
    expect(canMerge(state)).toBe(false);
    expect(canRename(state)).toBe(true);
    state = toggleSelect(state, 2);
    expect(canMerge(state)).toBe(true);
    expect(canRename(state)).toBe(false);
  });

  it("queries need non-blank text", () => {
    expect(canQuery("")).toBe(false);
    expect(canQuery("   ")).toBe(false);
    expect(canQuery("red mug")).toBe(true);
  });
});
