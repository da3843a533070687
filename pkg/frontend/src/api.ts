/** HTTP client for the render service plus the one-in-flight frame pump. */

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SceneInfo {
  id: string;
  gaussians: number;
  scene_aabb: number[];
}

export interface SceneRequest {
  dataset: string;
  lod?: { lod?: number; sigma_multiplier?: number; opacity_threshold?: number };
  trace?: { kappa?: number };
}

export interface FrameParams {
  scene: string;
  cam: string;
  tf: string;
  renderer: "gauss" | "ref";
  w: number;
  h: number;
}

export interface Stats {
  gaussians: number;
  last_frame_ms: number;
  hit_buffer_overflows: number;
  subframes: number;
  builds: number;
}

export class RebuildInProgressError extends Error {
  constructor() {
    super("scene rebuild already in progress");
  }
}

export class RenderClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async loadScene(req: SceneRequest): Promise<SceneInfo> {
    const resp = await this.fetchFn(`${this.base}/api/scene`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    if (resp.status === 409) throw new RebuildInProgressError();
    if (!resp.ok) throw new Error(`scene load failed: ${resp.status}`);
    return (await resp.json()) as SceneInfo;
  }

  frameUrl(params: FrameParams): string {
    const q = new URLSearchParams({
      scene: params.scene,
      cam: params.cam,
      tf: params.tf,
      renderer: params.renderer,
      w: String(params.w),
      h: String(params.h),
    });
    return `${this.base}/api/frame?${q}`;
  }

  async fetchFrame(params: FrameParams): Promise<Uint8Array> {
    const resp = await this.fetchFn(this.frameUrl(params));
    if (!resp.ok) throw new Error(`frame failed: ${resp.status}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async stats(scene: string): Promise<Stats> {
    const resp = await this.fetchFn(`${this.base}/api/stats?scene=${scene}`);
    if (!resp.ok) throw new Error(`stats failed: ${resp.status}`);
    return (await resp.json()) as Stats;
  }

  async compare(scene: string, cam: string, tf: string, w: number, h: number,
  ): Promise<{ psnr_db: number | null }> {
    const resp = await this.fetchFn(`${this.base}/api/compare`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scene, cam, tf, w, h }),
    });
    if (!resp.ok) throw new Error(`compare failed: ${resp.status}`);
    return (await resp.json()) as { psnr_db: number | null };
  }
}

/**
 * Per-pane frame scheduler: at most one request in flight; while one is
 * pending only the newest camera is remembered, and a response that was
 * superseded mid-flight is discarded instead of drawn.
 */
export class FramePump {
  private inflight = false;
  private queued: FrameParams | null = null;

  constructor(
    private readonly fetchFrame: (p: FrameParams) => Promise<Uint8Array>,
    private readonly onFrame: (bytes: Uint8Array, p: FrameParams) => void,
    private readonly onError: (err: unknown) => void = () => undefined,
  ) {}

  request(params: FrameParams): void {
    if (this.inflight) {
      this.queued = params; // newest wins
      return;
    }
    void this.launch(params);
  }

  private async launch(params: FrameParams): Promise<void> {
    this.inflight = true;
    try {
      const bytes = await this.fetchFrame(params);
      if (this.queued === null) {
        this.onFrame(bytes, params);
      }
    } catch (err) {
      this.onError(err);
    } finally {
      this.inflight = false;
      if (this.queued !== null) {
        const next = this.queued;
        this.queued = null;
        void this.launch(next);
      }
    }
  }
}
