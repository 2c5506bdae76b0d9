// Wiring: session lifecycle controls, brake input sources, live rendering.

import { BrakeCell, attachKeyboardBrake, attachPointerBrake,
         startGamepadBrake } from "./input.js";
import { ReplayClient, StreamHandle } from "./protocol.js";
import { PathProjection, StripChart, renderProgress, renderResult,
         showBanner } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const cell = new BrakeCell();
let client: ReplayClient | null = null;
let stream: StreamHandle | null = null;
let sessionId: string | null = null;
let sessionInfo: { V0r: number } | null = null;

function setup(): void {
  const banner = el<HTMLDivElement>("banner");
  const xy = new PathProjection(el<HTMLCanvasElement>("proj-xy"), [0, 1], "XY");
  const xz = new PathProjection(el<HTMLCanvasElement>("proj-xz"), [0, 2], "XZ");
  const vChart = new StripChart(el<HTMLCanvasElement>("chart-v"), "v [1/s]", [0, 1]);
  const rChart = new StripChart(el<HTMLCanvasElement>("chart-r"), "brake R", [-1, 0]);
  const progress = el<HTMLDivElement>("progress-fill");

  attachPointerBrake(el("brake-pad"), cell);
  attachKeyboardBrake(window, cell);
  startGamepadBrake(cell);

  el<HTMLButtonElement>("btn-connect").addEventListener("click", async () => {
    const base = el<HTMLInputElement>("server-url").value;
    client = new ReplayClient(base);
    sessionId = el<HTMLInputElement>("session-id").value.trim() || null;
    if (!sessionId) {
      showBanner(banner, "enter the session id printed by the replay server");
      return;
    }
    stream?.close();
    stream = client.connectStream(sessionId, () => cell.read(), {
      onOpen: () => showBanner(banner, ""),
      onState: (msg) => {
        xy.push(msg.p);
        xz.push(msg.p);
        if (sessionInfo) vChart.push(msg.v / sessionInfo.V0r);
        else vChart.push(msg.v);
        rChart.push(msg.R);
        renderProgress(progress, msg);
      },
      onDone: async () => {
        showBanner(banner, "replay finished");
        if (client && sessionId) {
          renderResult(el("result"), await client.result(sessionId));
        }
      },
      onClose: () => showBanner(banner,
        "stream disconnected — the server releases the brake after 0.25 s"),
    });
  });

  el<HTMLButtonElement>("btn-start").addEventListener("click", async () => {
    if (client && sessionId) await client.start(sessionId);
  });
  el<HTMLButtonElement>("btn-accept").addEventListener("click", async () => {
    if (client && sessionId) {
      renderResult(el("result"), await client.result(sessionId));
    }
  });
  el<HTMLButtonElement>("btn-redo").addEventListener("click", async () => {
    if (client && sessionId) {
      await client.stop(sessionId);
      el("result").innerHTML = "";
      await client.start(sessionId);
    }
  });
}

window.addEventListener("DOMContentLoaded", setup);
