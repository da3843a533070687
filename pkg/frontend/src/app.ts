/** DOM wiring: canvases, control panel, drag handling, URL sync. */

import { FramePump, FrameParams, RenderClient } from "./api.js";
import { ViewerController } from "./controller.js";
import { decodePpm } from "./ppm.js";
import { stateFromQuery, stateToQuery } from "./state.js";

const DRAG_DEBOUNCE_MS = 50;

function drawTo(canvas: HTMLCanvasElement) {
  return (bytes: Uint8Array, params: FrameParams) => {
    const img = decodePpm(bytes);
    canvas.width = img.width;
    canvas.height = img.height;
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    const rgba = new Uint8ClampedArray(img.pixels); // pin to a plain ArrayBuffer
    ctx.putImageData(new ImageData(rgba, img.width, img.height), 0, 0);
    canvas.dataset.renderer = params.renderer;
  };
}

function debounced<A extends unknown[]>(fn: (...args: A) => void, ms: number) {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => fn(...args), ms);
  };
}

export function mountViewer(root: HTMLElement, serviceBase = ""): ViewerController {
  root.innerHTML = `
    <div class="toolbar">
      <label>dataset <input id="gv-dataset" size="44"></label>
      <label>LOD <select id="gv-lod">${[1, 2, 3, 4, 5]
        .map((n) => `<option>${n}</option>`).join("")}</select></label>
      <label>sigma <select id="gv-sigma">${[1, 2, 3]
        .map((n) => `<option>${n}</option>`).join("")}</select></label>
      <label>TF <select id="gv-tf">
        <option>gray</option><option>jet</option><option>bluewhite</option>
      </select></label>
      <label><input type="checkbox" id="gv-compare"> side-by-side reference</label>
      <button id="gv-psnr">PSNR</button>
      <span id="gv-status" class="status"></span>
    </div>
    <div class="panes">
      <canvas id="gv-main"></canvas>
      <canvas id="gv-ref" hidden></canvas>
    </div>
    <div id="gv-overlay" class="overlay"></div>
    <div id="gv-error" class="error" hidden></div>`;

  const el = <T extends HTMLElement>(id: string) =>
    root.querySelector<T>(`#${id}`)!;
  const mainCanvas = el<HTMLCanvasElement>("gv-main");
  const refCanvas = el<HTMLCanvasElement>("gv-ref");
  const status = el<HTMLSpanElement>("gv-status");
  const overlay = el<HTMLDivElement>("gv-overlay");
  const errorBox = el<HTMLDivElement>("gv-error");

  const client = new RenderClient(serviceBase);
  const showError = (err: unknown) => {
    errorBox.hidden = false;
    errorBox.textContent = `service error: ${String(err)}`;
  };
  const mainPane = new FramePump(
    (p) => client.fetchFrame(p),
    (bytes, p) => {
      errorBox.hidden = true;
      drawTo(mainCanvas)(bytes, p);
      void refreshOverlay();
    },
    showError,
  );
  const refPane = new FramePump(
    (p) => client.fetchFrame(p),
    drawTo(refCanvas),
    showError,
  );

  const controller = new ViewerController(client, mainPane, refPane, {
    onStatus: (text) => {
      status.textContent = text;
    },
    onError: showError,
  }, stateFromQuery(location.search));

  async function refreshOverlay(): Promise<void> {
    if (controller.sceneId === null) return;
    const stats = await client.stats(controller.sceneId);
    overlay.textContent =
      `${stats.gaussians} gaussians · ${stats.last_frame_ms.toFixed(0)} ms/frame` +
      (stats.hit_buffer_overflows ? ` · ${stats.hit_buffer_overflows} overflows` : "");
  }

  const syncUrl = () => {
    history.replaceState(null, "", `?${stateToQuery(controller.state)}`);
  };

  const dataset = el<HTMLInputElement>("gv-dataset");
  dataset.value = controller.state.dataset;
  dataset.addEventListener("change", () => {
    void controller.setDataset(dataset.value).then(syncUrl);
  });

  const lod = el<HTMLSelectElement>("gv-lod");
  lod.value = String(controller.state.lod);
  lod.addEventListener("change", () => {
    void controller.setLod(Number(lod.value)).then(syncUrl);
  });

  const sigma = el<HTMLSelectElement>("gv-sigma");
  sigma.value = String(controller.state.sigma);
  sigma.addEventListener("change", () => {
    void controller.setSigma(Number(sigma.value)).then(syncUrl);
  });

  const tf = el<HTMLSelectElement>("gv-tf");
  tf.value = controller.state.tf;
  tf.addEventListener("change", () => {
    controller.setTransferFunction(tf.value);
    syncUrl();
  });

  const compare = el<HTMLInputElement>("gv-compare");
  compare.checked = controller.state.compare;
  compare.addEventListener("change", () => {
    refCanvas.hidden = !compare.checked;
    controller.setCompare(compare.checked);
    syncUrl();
  });

  el<HTMLButtonElement>("gv-psnr").addEventListener("click", () => {
    void controller.comparePsnr().then((value) => {
      status.textContent =
        value === null ? "PSNR: identical images" : `PSNR: ${value.toFixed(2)} dB`;
    });
  });

  // drag = orbit, shift/right-drag = pan, wheel = dolly; motion applies
  // immediately but the frame request is debounced while dragging
  const requestFrame = debounced(() => {
    controller.refresh();
    syncUrl();
  }, DRAG_DEBOUNCE_MS);
  let dragging = false;
  let panning = false;
  mainCanvas.addEventListener("pointerdown", (ev) => {
    dragging = true;
    panning = ev.shiftKey || ev.button === 2;
    mainCanvas.setPointerCapture(ev.pointerId);
  });
  mainCanvas.addEventListener("pointerup", () => {
    dragging = false;
    controller.refresh();
    syncUrl();
  });
  mainCanvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
  mainCanvas.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    controller.applyCameraInput(
      panning
        ? { kind: "pan", dx: ev.movementX, dy: ev.movementY }
        : { kind: "orbit", dx: ev.movementX, dy: ev.movementY },
      { defer: true },
    );
    requestFrame();
  });
  mainCanvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    controller.applyCameraInput({ kind: "dolly", delta: ev.deltaY }, { defer: true });
    requestFrame();
  });

  void controller.loadScene().then(syncUrl);
  return controller;
}
