import { describe, expect, it } from "vitest";

import {
  CameraInput,
  ORBIT_RATE,
  OrbitCamera,
  cameraPosition,
  dolly,
  frameBox,
  orbit,
  pan,
  replay,
  toWire,
} from "../src/camera.js";

const start: OrbitCamera = {
  target: [1, 2, 3],
  distance: 10,
  yaw: 0.3,
  pitch: -0.2,
  fovDeg: 45,
};

describe("orbit camera", () => {
  it("returns to the start after a full horizontal revolution", () => {
    const pixels = (2 * Math.PI) / ORBIT_RATE;
    let cam = start;
    for (let i = 0; i < 16; i++) cam = orbit(cam, pixels / 16, 0);
    const a = cameraPosition(start);
    const b = cameraPosition(cam);
    for (let i = 0; i < 3; i++) expect(Math.abs(a[i] - b[i])).toBeLessThan(1e-3);
  });

  it("restores distance after equal scroll in and out", () => {
    const cam = dolly(dolly(start, 240), -240);
    expect(cam.distance).toBeCloseTo(start.distance, 9);
  });

  it("clamps pitch short of the poles", () => {
    const cam = orbit(start, 0, 1e7);
    expect(cam.pitch).toBeLessThan(Math.PI / 2);
    expect(cameraPosition(cam).every(Number.isFinite)).toBe(true);
  });

  it("pans in the view plane without changing distance", () => {
    const cam = pan(start, 40, -25);
    expect(cam.distance).toBe(start.distance);
    expect(cam.target).not.toEqual(start.target);
    const offset = Math.hypot(
      cameraPosition(cam)[0] - cam.target[0],
      cameraPosition(cam)[1] - cam.target[1],
      cameraPosition(cam)[2] - cam.target[2],
    );
    expect(offset).toBeCloseTo(start.distance, 9);
  });

  it("replays drag scripts deterministically", () => {
    const script: CameraInput[] = [
      { kind: "orbit", dx: 63, dy: -11 },
      { kind: "dolly", delta: -180 },
      { kind: "pan", dx: -25, dy: 8 },
      { kind: "orbit", dx: -140, dy: 31 },
      { kind: "dolly", delta: 60 },
    ];
    const a = replay(start, script);
    const b = replay(start, script);
    expect(toWire(a)).toBe(toWire(b));
    expect(a).toEqual(b);
  });

  it("frames a box on the +z side looking at its center", () => {
    const cam = frameBox([0, 0, 0, 4, 4, 4], 45);
    expect(cam.target).toEqual([2, 2, 2]);
    const pos = cameraPosition(cam);
    expect(pos[0]).toBeCloseTo(2, 12);
    expect(pos[1]).toBeCloseTo(2, 12);
    expect(pos[2]).toBeGreaterThan(6);
  });

  it("serializes ten comma-separated fields ending in the fov", () => {
    const wire = toWire(start);
    const parts = wire.split(",");
    expect(parts).toHaveLength(10);
    expect(Number(parts[9])).toBe(45);
    expect(parts.slice(3, 6).map(Number)).toEqual([1, 2, 3]);
    expect(parts.slice(6, 9).map(Number)).toEqual([0, 1, 0]);
  });
});
