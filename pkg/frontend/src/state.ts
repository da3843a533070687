/** URL round-tripping: the whole view is reconstructible from the query. */

import { OrbitCamera } from "./camera.js";
import { DEFAULT_STATE, ViewerState } from "./controller.js";

export function stateToQuery(state: ViewerState): string {
  const q = new URLSearchParams();
  q.set("dataset", state.dataset);
  q.set("lod", String(state.lod));
  q.set("sigma", String(state.sigma));
  q.set("kappa", String(state.kappa));
  q.set("tf", state.tf);
  if (state.compare) q.set("compare", "1");
  q.set("res", `${state.width}x${state.height}`);
  const cam = state.camera;
  if (cam !== null) {
    q.set(
      "view",
      [cam.target[0], cam.target[1], cam.target[2], cam.distance, cam.yaw,
        cam.pitch, cam.fovDeg].map(String).join(","),
    );
  }
  return q.toString();
}

export function stateFromQuery(query: string): ViewerState {
  const q = new URLSearchParams(query);
  const state: ViewerState = { ...DEFAULT_STATE };
  if (q.has("dataset")) state.dataset = q.get("dataset")!;
  if (q.has("lod")) state.lod = Number(q.get("lod"));
  if (q.has("sigma")) state.sigma = Number(q.get("sigma"));
  if (q.has("kappa")) state.kappa = Number(q.get("kappa"));
  if (q.has("tf")) state.tf = q.get("tf")!;
  state.compare = q.get("compare") === "1";
  const res = q.get("res");
  if (res?.includes("x")) {
    const [w, h] = res.split("x").map(Number);
    if (w > 0 && h > 0) {
      state.width = w;
      state.height = h;
    }
  }
  const view = q.get("view");
  if (view) {
    const v = view.split(",").map(Number);
    if (v.length === 7 && v.every(Number.isFinite)) {
      const camera: OrbitCamera = {
        target: [v[0], v[1], v[2]],
        distance: v[3],
        yaw: v[4],
        pitch: v[5],
        fovDeg: v[6],
      };
      state.camera = camera;
    }
  }
  return state;
}
