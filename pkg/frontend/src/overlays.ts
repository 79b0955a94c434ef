// three.js scene objects built from engine data. Everything here works
// without a WebGL context, so tests can inspect the scene graph headlessly.

import * as THREE from "three";

import type { DiffResponse, InventoryResponse, SegmentInfo } from "./api.js";
import { classColor, DIFF_GREEN, DIFF_RED, heatColor, SELECTED } from "./colors.js";
import type { VMesh } from "./vmesh.js";

export const SCENE_MESH = "scene-mesh";
export const DIFF_GROUP = "diff-overlay";

/** Vertex -> segment assignment: nearest same-class centroid, mirroring the
 * engine's ranking rule (the mesh format carries classes, not segment ids). */
export function assignVertices(mesh: VMesh, inventory: InventoryResponse): Int32Array {
  const owner = new Int32Array(mesh.vertexCount).fill(-1);
  const byClass = new Map<number, SegmentInfo[]>();
  for (const seg of inventory.segments) {
    const list = byClass.get(seg.class_id) ?? [];
    list.push(seg);
    byClass.set(seg.class_id, list);
  }
  if (!mesh.classes) return owner;
  for (let v = 0; v < mesh.vertexCount; v++) {
    const segs = byClass.get(mesh.classes[v]);
    if (!segs) continue;
    const x = mesh.positions[3 * v];
    const y = mesh.positions[3 * v + 1];
    const z = mesh.positions[3 * v + 2];
    let best = -1;
    let bestD = Infinity;
    for (const seg of segs) {
      const dx = x - seg.centroid[0];
      const dy = y - seg.centroid[1];
      const dz = z - seg.centroid[2];
      const d = dx * dx + dy * dy + dz * dz;
      if (d < bestD) {
        bestD = d;
        best = seg.segment_id;
      }
    }
    owner[v] = best;
  }
  return owner;
}

export function buildSceneMesh(mesh: VMesh): THREE.Mesh {
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.BufferAttribute(mesh.positions, 3));
  geometry.setIndex(new THREE.BufferAttribute(mesh.triangles, 1));
  const colors = new Float32Array(mesh.vertexCount * 3);
  geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
  geometry.computeVertexNormals();
  const material = new THREE.MeshLambertMaterial({ vertexColors: true });
  const object = new THREE.Mesh(geometry, material);
  object.name = SCENE_MESH;
  return object;
}

function paint(object: THREE.Mesh, vertex: number, rgb: [number, number, number]) {
  const attr = object.geometry.getAttribute("color") as THREE.BufferAttribute;
  attr.setXYZ(vertex, rgb[0], rgb[1], rgb[2]);
}

export function colorByClass(object: THREE.Mesh, mesh: VMesh, selected: number[] = [],
                             owner: Int32Array | null = null): void {
  const chosen = new Set(selected);
  for (let v = 0; v < mesh.vertexCount; v++) {
    if (owner && chosen.has(owner[v])) {
      paint(object, v, SELECTED);
    } else {
      paint(object, v, classColor(mesh.classes ? mesh.classes[v] : -1));
    }
  }
  (object.geometry.getAttribute("color") as THREE.BufferAttribute).needsUpdate = true;
}

export function colorByHeat(object: THREE.Mesh, heat: ArrayLike<number>): void {
  for (let v = 0; v < heat.length; v++) {
    paint(object, v, heatColor(heat[v]));
  }
  (object.geometry.getAttribute("color") as THREE.BufferAttribute).needsUpdate = true;
}

/** Green tint on re-identified segments, red hollow wireframes where objects
 * went missing, anchored at their previous centroids. */
export function buildDiffOverlay(
  diff: DiffResponse,
  sceneMesh: THREE.Mesh | null,
  mesh: VMesh | null,
  owner: Int32Array | null,
): THREE.Group {
  const group = new THREE.Group();
  group.name = DIFF_GROUP;
  if (sceneMesh && mesh && owner) {
    const unchangedIds = new Set(diff.unchanged.map((u) => u.curr_segment_id));
    for (let v = 0; v < mesh.vertexCount; v++) {
      if (unchangedIds.has(owner[v])) paint(sceneMesh, v, DIFF_GREEN);
    }
    (sceneMesh.geometry.getAttribute("color") as THREE.BufferAttribute).needsUpdate = true;
  }
  for (const entry of diff.unchanged) {
    const marker = new THREE.Mesh(
      new THREE.SphereGeometry(0.03, 8, 8),
      new THREE.MeshBasicMaterial({ color: new THREE.Color(...DIFF_GREEN) }),
    );
    marker.name = `unchanged:${entry.label}`;
    marker.userData = { status: "unchanged", label: entry.label };
    group.add(marker);
  }
  for (const entry of diff.missing) {
    const wire = new THREE.LineSegments(
      new THREE.WireframeGeometry(new THREE.BoxGeometry(0.3, 0.3, 0.3)),
      new THREE.LineBasicMaterial({ color: new THREE.Color(...DIFF_RED) }),
    );
    wire.position.set(...entry.prev_centroid);
    wire.name = `missing:${entry.label}`;
    wire.userData = { status: "missing", label: entry.label };
    group.add(wire);
  }
  return group;
}

export function missingWireframes(group: THREE.Object3D): THREE.Object3D[] {
  return group.children.filter((c) => c.userData.status === "missing");
}

/** Segment id under a picked triangle, via the face's first vertex. */
export function pickSegment(mesh: VMesh, owner: Int32Array, faceIndex: number): number {
  if (faceIndex < 0 || faceIndex >= mesh.triangleCount) return -1;
  return owner[mesh.triangles[3 * faceIndex]];
}
