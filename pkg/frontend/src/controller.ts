/**
 * Headless viewer logic: owns the UI state, decides which service calls
 * each action triggers, and keeps the panes' frame pumps fed.
 *
 * Contract highlights: changing the transfer function only requests new
 * frames (never a scene rebuild); changing LOD, sigma or kappa rebuilds
 * the scene exactly once and then refreshes; camera motion only
 * requests frames.
 */

import {
  FramePump,
  RebuildInProgressError,
  RenderClient,
  SceneInfo,
} from "./api.js";
import {
  CameraInput,
  OrbitCamera,
  applyInput,
  frameBox,
  toWire,
} from "./camera.js";

export interface ViewerState {
  dataset: string;
  lod: number;
  sigma: number;
  kappa: number;
  tf: string;
  compare: boolean;
  width: number;
  height: number;
  camera: OrbitCamera | null;
}

export const DEFAULT_STATE: ViewerState = {
  dataset: "synth:gaussian_blob:64:sigma=16,peak=0.04,threshold=0.002",
  lod: 2,
  sigma: 2,
  kappa: 0.01,
  tf: "gray",
  compare: false,
  width: 384,
  height: 384,
  camera: null,
};

export interface ControllerEvents {
  onScene?: (info: SceneInfo) => void;
  onStatus?: (text: string) => void;
  onError?: (text: string) => void;
}

export class ViewerController {
  state: ViewerState;
  sceneId: string | null = null;
  gaussians = 0;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly client: RenderClient,
    private readonly mainPane: FramePump,
    private readonly comparePane: FramePump,
    private readonly events: ControllerEvents = {},
    initial: Partial<ViewerState> = {},
  ) {
    this.state = { ...DEFAULT_STATE, ...initial };
  }

  /** Build (or rebuild) the scene; a 409 shows a banner and retries. */
  async loadScene(): Promise<void> {
    this.events.onStatus?.("building scene…");
    try {
      const info = await this.client.loadScene({
        dataset: this.state.dataset,
        lod: { lod: this.state.lod, sigma_multiplier: this.state.sigma },
        trace: { kappa: this.state.kappa },
      });
      this.sceneId = info.id;
      this.gaussians = info.gaussians;
      if (this.state.camera === null) {
        this.state.camera = frameBox(info.scene_aabb);
      }
      this.events.onScene?.(info);
      this.events.onStatus?.(`${info.gaussians} gaussians`);
      this.refresh();
    } catch (err) {
      if (err instanceof RebuildInProgressError) {
        this.events.onStatus?.("rebuilding…");
        this.retryTimer = setTimeout(() => void this.loadScene(), 250);
        return;
      }
      this.events.onError?.(String(err));
    }
  }

  dispose(): void {
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
  }

  /** Transfer-function swap: frames only, no rebuild. */
  setTransferFunction(tf: string): void {
    this.state.tf = tf;
    this.refresh();
  }

  /** Detail / box / cutoff changes invalidate the fitted model. */
  async setLod(lod: number): Promise<void> {
    this.state.lod = lod;
    await this.loadScene();
  }

  async setSigma(sigma: number): Promise<void> {
    this.state.sigma = sigma;
    await this.loadScene();
  }

  async setKappa(kappa: number): Promise<void> {
    this.state.kappa = kappa;
    await this.loadScene();
  }

  async setDataset(dataset: string): Promise<void> {
    this.state.dataset = dataset;
    this.state.camera = null; // reframe for the new scene
    await this.loadScene();
  }

  setCompare(on: boolean): void {
    this.state.compare = on;
    this.refresh();
  }

  /** Camera motion: frames only. Callers may defer the refresh (drag
   * handlers debounce it) while still accumulating the motion. */
  applyCameraInput(input: CameraInput, opts: { defer?: boolean } = {}): void {
    if (this.state.camera === null) return;
    this.state.camera = applyInput(this.state.camera, input);
    if (!opts.defer) this.refresh();
  }

  cameraWire(): string | null {
    return this.state.camera === null ? null : toWire(this.state.camera);
  }

  refresh(): void {
    if (this.sceneId === null || this.state.camera === null) return;
    const cam = toWire(this.state.camera);
    const base = {
      scene: this.sceneId,
      cam,
      tf: this.state.tf,
      w: this.state.width,
      h: this.state.height,
    };
    this.mainPane.request({ ...base, renderer: "gauss" });
    if (this.state.compare) {
      this.comparePane.request({ ...base, renderer: "ref" });
    }
  }

  async comparePsnr(): Promise<number | null> {
    if (this.sceneId === null || this.state.camera === null) return null;
    const out = await this.client.compare(
      this.sceneId,
      toWire(this.state.camera),
      this.state.tf,
      this.state.width,
      this.state.height,
    );
    return out.psnr_db;
  }
}
