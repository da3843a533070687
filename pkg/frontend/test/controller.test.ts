import { beforeEach, describe, expect, it } from "vitest";

import { FramePump, FrameParams, RenderClient } from "../src/api.js";
import { ViewerController } from "../src/controller.js";
import { stateFromQuery, stateToQuery } from "../src/state.js";

/** In-memory stand-in for the render service. */
class FakeService {
  sceneBuilds = 0;
  frameRequests: FrameParams[] = [];
  nextId = 1;
  currentId = "";

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const u = new URL(url, "http://service");
    if (u.pathname === "/api/scene") {
      this.sceneBuilds += 1;
      this.currentId = `s${this.nextId++}`;
      return Response.json({
        id: this.currentId,
        gaussians: 1234,
        scene_aabb: [0, 0, 0, 8, 8, 8],
      });
    }
    if (u.pathname === "/api/frame") {
      const params = Object.fromEntries(u.searchParams) as unknown as FrameParams;
      this.frameRequests.push(params);
      return new Response(new Uint8Array([0x50, 0x36, 0x0a]).buffer, {
        status: 200,
      });
    }
    if (u.pathname === "/api/stats") {
      return Response.json({
        gaussians: 1234,
        last_frame_ms: 5,
        hit_buffer_overflows: 0,
        subframes: this.frameRequests.length,
        builds: this.sceneBuilds,
      });
    }
    if (u.pathname === "/api/compare") {
      return Response.json({ psnr_db: 33.3 });
    }
    return new Response("not found", { status: 404 });
  };
}

describe("viewer controller contract", () => {
  let service: FakeService;
  let controller: ViewerController;
  let drawn: FrameParams[];

  beforeEach(async () => {
    service = new FakeService();
    const client = new RenderClient("http://service", service.fetch);
    drawn = [];
    const pump = (pane: string) =>
      new FramePump(
        (p) => client.fetchFrame(p),
        (_bytes, p) => drawn.push({ ...p, renderer: p.renderer }),
      );
    controller = new ViewerController(client, pump("main"), pump("ref"));
    await controller.loadScene();
    await Promise.resolve();
  });

  it("loads a scene and frames it once", () => {
    expect(service.sceneBuilds).toBe(1);
    expect(controller.sceneId).toBe("s1");
    expect(controller.state.camera).not.toBeNull();
  });

  it("transfer-function swaps issue zero scene rebuilds", async () => {
    const builds = service.sceneBuilds;
    const frames = service.frameRequests.length;
    controller.setTransferFunction("jet");
    controller.setTransferFunction("bluewhite");
    await new Promise((r) => setTimeout(r, 0));
    expect(service.sceneBuilds).toBe(builds);
    expect(service.frameRequests.length).toBeGreaterThan(frames);
    expect(service.frameRequests.at(-1)?.tf).toBe("bluewhite");
  });

  it("a LOD switch issues exactly one rebuild", async () => {
    const builds = service.sceneBuilds;
    await controller.setLod(5);
    await new Promise((r) => setTimeout(r, 0));
    expect(service.sceneBuilds).toBe(builds + 1);
    expect(controller.sceneId).toBe("s2");
  });

  it("camera motion issues frames only", async () => {
    const builds = service.sceneBuilds;
    controller.applyCameraInput({ kind: "orbit", dx: 30, dy: 5 });
    controller.applyCameraInput({ kind: "dolly", delta: -120 });
    await new Promise((r) => setTimeout(r, 0));
    expect(service.sceneBuilds).toBe(builds);
    expect(service.frameRequests.length).toBeGreaterThan(0);
  });

  it("compare toggle drives the second pane with the reference renderer", async () => {
    controller.setCompare(true);
    await new Promise((r) => setTimeout(r, 0));
    const renderers = new Set(service.frameRequests.map((p) => p.renderer));
    expect(renderers.has("gauss")).toBe(true);
    expect(renderers.has("ref")).toBe(true);
    const psnr = await controller.comparePsnr();
    expect(psnr).toBe(33.3);
  });

  it("ui state round-trips through the url query", () => {
    controller.setTransferFunction("jet");
    controller.state.compare = true;
    const query = stateToQuery(controller.state);
    const restored = stateFromQuery(query);
    expect(restored.tf).toBe("jet");
    expect(restored.compare).toBe(true);
    expect(restored.lod).toBe(controller.state.lod);
    expect(restored.camera).toEqual(controller.state.camera);
  });
});

describe("frame pump", () => {
  it("keeps one request in flight and the newest wins", async () => {
    const resolvers: Array<(v: Uint8Array) => void> = [];
    const served: string[] = [];
    const drawnCams: string[] = [];
    const pump = new FramePump(
      (p) => {
        served.push(p.cam);
        return new Promise<Uint8Array>((resolve) => resolvers.push(resolve));
      },
      (_bytes, p) => drawnCams.push(p.cam),
    );
    const params = (cam: string): FrameParams => ({
      scene: "s1", cam, tf: "gray", renderer: "gauss", w: 8, h: 8,
    });
    pump.request(params("a"));
    pump.request(params("b")); // queued while a is in flight
    pump.request(params("c")); // replaces b
    expect(served).toEqual(["a"]);
    resolvers[0](new Uint8Array());
    await new Promise((r) => setTimeout(r, 0));
    expect(served).toEqual(["a", "c"]);
    resolvers[1](new Uint8Array());
    await new Promise((r) => setTimeout(r, 0));
    // the superseded "a" response was discarded, only "c" was drawn
    expect(drawnCams).toEqual(["c"]);
  });
});
