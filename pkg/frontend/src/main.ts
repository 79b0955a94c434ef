// Browser bootstrap: WebGL renderer, drag orbit, raycast picking.

import * as THREE from "three";

import { SceneClient } from "./api.js";
import { App, RenderAdapter } from "./app.js";
import { SCENE_MESH } from "./overlays.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8754";
const sceneId = params.get("scene") ?? "default";

const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const panel = document.getElementById("panel") as HTMLElement;

const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
const scene = new THREE.Scene();
scene.background = new THREE.Color(0x14161a);
scene.add(new THREE.AmbientLight(0xffffff, 0.55));
const sun = new THREE.DirectionalLight(0xffffff, 1.0);
sun.position.set(2, 3, 4);
scene.add(sun);

const camera = new THREE.PerspectiveCamera(55, 1, 0.01, 100);
let orbit = { theta: 0.8, phi: 1.0, radius: 4.0, target: new THREE.Vector3(0, 0, 0.3) };

function applyOrbit() {
  camera.position.set(
    orbit.target.x + orbit.radius * Math.sin(orbit.phi) * Math.cos(orbit.theta),
    orbit.target.y + orbit.radius * Math.sin(orbit.phi) * Math.sin(orbit.theta),
    orbit.target.z + orbit.radius * Math.cos(orbit.phi),
  );
  camera.up.set(0, 0, 1);
  camera.lookAt(orbit.target);
}

function resize() {
  const w = canvas.clientWidth || canvas.parentElement!.clientWidth;
  const h = canvas.clientHeight || canvas.parentElement!.clientHeight;
  renderer.setSize(w, h, false);
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
}

let needsRender = true;
const adapter: RenderAdapter = {
  scene,
  requestRender: () => {
    needsRender = true;
  },
};

const app = new App(panel, new SceneClient(base), adapter);

let dragging = false;
let last = { x: 0, y: 0 };
let moved = 0;
canvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  moved = 0;
  last = { x: e.clientX, y: e.clientY };
});
window.addEventListener("pointerup", () => {
  dragging = false;
});
window.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  const dx = e.clientX - last.x;
  const dy = e.clientY - last.y;
  moved += Math.abs(dx) + Math.abs(dy);
  last = { x: e.clientX, y: e.clientY };
  orbit.theta -= dx * 0.005;
  orbit.phi = Math.min(Math.PI - 0.05, Math.max(0.05, orbit.phi - dy * 0.005));
  adapter.requestRender();
});
canvas.addEventListener("wheel", (e) => {
  orbit.radius = Math.min(20, Math.max(0.3, orbit.radius * (1 + e.deltaY * 0.001)));
  adapter.requestRender();
});

const raycaster = new THREE.Raycaster();
canvas.addEventListener("click", (e) => {
  if (moved > 4) return; // it was a drag, not a pick
  const rect = canvas.getBoundingClientRect();
  const ndc = new THREE.Vector2(
    ((e.clientX - rect.left) / rect.width) * 2 - 1,
    -((e.clientY - rect.top) / rect.height) * 2 + 1,
  );
  raycaster.setFromCamera(ndc, camera);
  const target = scene.getObjectByName(SCENE_MESH);
  if (!target) return;
  const hits = raycaster.intersectObject(target);
  if (hits.length && hits[0].faceIndex !== undefined && hits[0].faceIndex !== null) {
    app.selectFromFace(hits[0].faceIndex);
  }
});

window.addEventListener("resize", () => {
  resize();
  adapter.requestRender();
});

function tick() {
  if (needsRender) {
    needsRender = false;
    applyOrbit();
    renderer.render(scene, camera);
  }
  requestAnimationFrame(tick);
}

resize();
void app.start(sceneId);
tick();
