/**
 * Orbit camera: a target point, a distance, and yaw/pitch angles.
 * All updates are pure so drag sequences replay deterministically.
 */

export type Vec3 = [number, number, number];

export interface OrbitCamera {
  target: Vec3;
  distance: number;
  /** radians around +Y; 0 looks down -Z from +Z */
  yaw: number;
  /** radians above the horizon, clamped inside +-pi/2 */
  pitch: number;
  fovDeg: number;
}

const PITCH_LIMIT = Math.PI / 2 - 1e-3;
export const ORBIT_RATE = 0.005; // radians per pixel dragged
export const PAN_RATE = 0.002; // fraction of distance per pixel
export const DOLLY_RATE = 0.0015; // log-distance per wheel unit

const add = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
const scale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];

/** Unit vector from the target toward the camera. */
export function viewOffset(cam: OrbitCamera): Vec3 {
  const cp = Math.cos(cam.pitch);
  return [
    Math.sin(cam.yaw) * cp,
    Math.sin(cam.pitch),
    Math.cos(cam.yaw) * cp,
  ];
}

export function cameraPosition(cam: OrbitCamera): Vec3 {
  return add(cam.target, scale(viewOffset(cam), cam.distance));
}

/** Camera-frame right and up vectors (world up +Y). */
export function cameraBasis(cam: OrbitCamera): { right: Vec3; up: Vec3 } {
  const f = scale(viewOffset(cam), -1); // forward = toward the target
  const right: Vec3 = [-f[2], 0, f[0]]; // cross(f, +Y), unnormalized
  const rlen = Math.hypot(right[0], right[2]) || 1;
  const r: Vec3 = [right[0] / rlen, 0, right[2] / rlen];
  const up: Vec3 = [
    r[1] * f[2] - r[2] * f[1],
    r[2] * f[0] - r[0] * f[2],
    r[0] * f[1] - r[1] * f[0],
  ];
  return { right: r, up };
}

export function orbit(cam: OrbitCamera, dxPx: number, dyPx: number): OrbitCamera {
  const yaw = cam.yaw + dxPx * ORBIT_RATE;
  const pitch = Math.min(
    PITCH_LIMIT,
    Math.max(-PITCH_LIMIT, cam.pitch + dyPx * ORBIT_RATE),
  );
  return { ...cam, yaw, pitch };
}

export function pan(cam: OrbitCamera, dxPx: number, dyPx: number): OrbitCamera {
  const { right, up } = cameraBasis(cam);
  const step = cam.distance * PAN_RATE;
  const move = add(scale(right, -dxPx * step), scale(up, dyPx * step));
  return { ...cam, target: add(cam.target, move) };
}

export function dolly(cam: OrbitCamera, wheelDelta: number): OrbitCamera {
  const distance = cam.distance * Math.exp(wheelDelta * DOLLY_RATE);
  return { ...cam, distance: Math.max(distance, 1e-6) };
}

export type CameraInput =
  | { kind: "orbit"; dx: number; dy: number }
  | { kind: "pan"; dx: number; dy: number }
  | { kind: "dolly"; delta: number };

export function applyInput(cam: OrbitCamera, input: CameraInput): OrbitCamera {
  switch (input.kind) {
    case "orbit":
      return orbit(cam, input.dx, input.dy);
    case "pan":
      return pan(cam, input.dx, input.dy);
    case "dolly":
      return dolly(cam, input.delta);
  }
}

export function replay(cam: OrbitCamera, inputs: CameraInput[]): OrbitCamera {
  return inputs.reduce(applyInput, cam);
}

/**
 * Initial framing that mirrors the service's default: camera on the +Z
 * side of the scene box, far enough that the bounding sphere fits with
 * a 30% margin.
 */
export function frameBox(aabb: number[], fovDeg = 45): OrbitCamera {
  const lo = aabb.slice(0, 3);
  const hi = aabb.slice(3, 6);
  const target: Vec3 = [
    (lo[0] + hi[0]) / 2,
    (lo[1] + hi[1]) / 2,
    (lo[2] + hi[2]) / 2,
  ];
  const radius =
    Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]) / 2 || 1;
  const tanHalf = Math.tan((fovDeg * Math.PI) / 360);
  return {
    target,
    distance: (radius * 1.3) / tanHalf + radius,
    yaw: 0,
    pitch: 0,
    fovDeg,
  };
}

/** Serialize as the service camera wire format: px,py,pz,lx,ly,lz,ux,uy,uz,fov. */
export function toWire(cam: OrbitCamera): string {
  const pos = cameraPosition(cam);
  const vals = [...pos, ...cam.target, 0, 1, 0, cam.fovDeg];
  return vals.map((v) => String(v)).join(",");
}
