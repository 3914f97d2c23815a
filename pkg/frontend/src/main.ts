import { Box, ServiceClient, SessionInfo } from "./api.js";
import { drawDragRect, drawImageNative, renderResultPair } from "./canvas.js";
import { ViewerController, Renderer } from "./controller.js";
import type { HistoryEntry } from "./state.js";

declare global {
  interface Window {
    CLSR_SERVICE_URL?: string;
  }
}

const serviceUrl =
  window.CLSR_SERVICE_URL ??
  new URLSearchParams(location.search).get("service") ??
  "http://127.0.0.1:8700";

const el = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

const fileInput = el<HTMLInputElement>("file");
const canvas = el<HTMLCanvasElement>("context");
const srCanvas = el<HTMLCanvasElement>("sr");
const zoomCanvas = el<HTMLCanvasElement>("zoom");
const header = el<HTMLDivElement>("session-info");
const counter = el<HTMLDivElement>("flops-counter");
const historyList = el<HTMLUListElement>("history");
const toast = el<HTMLDivElement>("toast");

let image: HTMLImageElement | null = null;
let committed: Box | null = null;

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 4000);
}

const renderer: Renderer = {
  showSession(info: SessionInfo) {
    header.textContent =
      `session ${info.session_id.slice(0, 8)} · ${info.width}x${info.height} px · ` +
      `context cost ${info.context_gflops.toFixed(3)} GFLOPs · ` +
      `whole-image restore would cost ${info.post_gflops.toFixed(2)} GFLOPs`;
    counter.textContent = "saved: 0 GFLOPs";
    historyList.innerHTML = "";
  },
  showResult(entry: HistoryEntry, displayW: number, displayH: number, saved: number) {
    if (!image) return;
    void renderResultPair(srCanvas, zoomCanvas, image, entry, displayW, displayH).catch((e) =>
      showToast(String(e)),
    );
    counter.textContent =
      `last ROI: ${entry.roiGflops.toFixed(3)} GFLOPs in ${entry.elapsedMs.toFixed(0)} ms · ` +
      `saved: ${saved.toFixed(2)} GFLOPs`;
    const item = document.createElement("li");
    const b = entry.box;
    item.textContent = `(${b.top},${b.left}) ${b.width}x${b.height} — ${entry.roiGflops.toFixed(3)} GF`;
    const index = controller.state ? controller.state.history.length - 1 : 0;
    item.addEventListener("click", () => controller.replay(index));
    historyList.prepend(item);
  },
  showError(message: string) {
    showToast(message);
  },
};

const controller = new ViewerController(new ServiceClient(serviceUrl), renderer);

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const buf = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  buf.forEach((byte) => (binary += String.fromCharCode(byte)));
  const b64 = btoa(binary);
  try {
    await controller.open(b64);
  } catch {
    return; // toast already shown
  }
  image = new Image();
  image.onload = () => {
    drawImageNative(canvas, image!);
    committed = null;
  };
  image.src = URL.createObjectURL(file);
});

// drag selection in LR pixel coordinates
let dragStart: { x: number; y: number } | null = null;

function canvasPos(ev: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}

function rawBox(a: { x: number; y: number }, b: { x: number; y: number }): Box {
  return {
    top: Math.min(a.y, b.y),
    left: Math.min(a.x, b.x),
    height: Math.abs(a.y - b.y),
    width: Math.abs(a.x - b.x),
  };
}

canvas.addEventListener("mousedown", (ev) => {
  dragStart = canvasPos(ev);
});

canvas.addEventListener("mousemove", (ev) => {
  if (!dragStart || !image) return;
  const raw = rawBox(dragStart, canvasPos(ev));
  const snapped = controller.prepareBox(raw);
  drawDragRect(canvas, image, snapped ?? raw, committed);
});

canvas.addEventListener("mouseup", async (ev) => {
  if (!dragStart || !image) return;
  const raw = rawBox(dragStart, canvasPos(ev));
  dragStart = null;
  const snapped = controller.prepareBox(raw);
  if (!snapped) {
    drawDragRect(canvas, image, null, committed);
    showToast("box must be at least 8x8 inside the image");
    return;
  }
  committed = snapped;
  drawDragRect(canvas, image, null, committed);
  await controller.dragSelect(raw);
});
