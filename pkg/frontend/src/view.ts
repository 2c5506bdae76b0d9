// Canvas rendering for the replay view: 2D end-effector path projections
// with a moving marker, a progress bar, strip charts for v and R, and the
// per-waypoint tolerance bands of the final result.

import { RefinementResultDoc, StateMessage } from "./protocol.js";

interface Bounds {
  min: [number, number];
  max: [number, number];
}

function growBounds(b: Bounds, x: number, y: number): void {
  b.min[0] = Math.min(b.min[0], x);
  b.min[1] = Math.min(b.min[1], y);
  b.max[0] = Math.max(b.max[0], x);
  b.max[1] = Math.max(b.max[1], y);
}

export class PathProjection {
  private readonly ctx: CanvasRenderingContext2D;
  private readonly points: [number, number][] = [];
  private readonly bounds: Bounds = { min: [1e9, 1e9], max: [-1e9, -1e9] };

  constructor(private readonly canvas: HTMLCanvasElement,
              private readonly axes: [number, number],
              private readonly label: string) {
    this.ctx = canvas.getContext("2d")!;
  }

  push(p: number[]): void {
    const x = p[this.axes[0]];
    const y = p[this.axes[1]];
    this.points.push([x, y]);
    growBounds(this.bounds, x, y);
    this.draw();
  }

  private toPixel([x, y]: [number, number]): [number, number] {
    const pad = 18;
    const w = this.canvas.width - 2 * pad;
    const h = this.canvas.height - 2 * pad;
    const sx = this.bounds.max[0] - this.bounds.min[0] || 1e-6;
    const sy = this.bounds.max[1] - this.bounds.min[1] || 1e-6;
    const s = Math.max(sx, sy);
    return [
      pad + ((x - this.bounds.min[0]) / s) * w,
      this.canvas.height - pad - ((y - this.bounds.min[1]) / s) * h,
    ];
  }

  private draw(): void {
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.fillStyle = "#888";
    ctx.font = "11px sans-serif";
    ctx.fillText(this.label, 6, 12);
    if (this.points.length < 2) return;
    ctx.strokeStyle = "#4477aa";
    ctx.lineWidth = 1.2;
    ctx.beginPath();
    this.points.forEach((pt, i) => {
      const [px, py] = this.toPixel(pt);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
    const [mx, my] = this.toPixel(this.points[this.points.length - 1]);
    ctx.fillStyle = "#cc3311";
    ctx.beginPath();
    ctx.arc(mx, my, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export class StripChart {
  private readonly ctx: CanvasRenderingContext2D;
  private readonly values: number[] = [];

  constructor(private readonly canvas: HTMLCanvasElement,
              private readonly label: string,
              private readonly range: [number, number]) {
    this.ctx = canvas.getContext("2d")!;
  }

  push(v: number): void {
    this.values.push(v);
    if (this.values.length > this.canvas.width - 20) this.values.shift();
    this.draw();
  }

  private draw(): void {
    const ctx = this.ctx;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#888";
    ctx.font = "11px sans-serif";
    ctx.fillText(this.label, 6, 12);
    const [lo, hi] = this.range;
    ctx.strokeStyle = "#228833";
    ctx.beginPath();
    this.values.forEach((v, i) => {
      const y = h - 4 - ((v - lo) / (hi - lo)) * (h - 20);
      if (i === 0) ctx.moveTo(10 + i, y);
      else ctx.lineTo(10 + i, y);
    });
    ctx.stroke();
  }
}

export function renderProgress(el: HTMLElement, msg: StateMessage): void {
  const pct = Math.min(100, msg.s_r * 100);
  el.style.width = `${pct.toFixed(1)}%`;
  el.textContent = `${(msg.s_r * 100).toFixed(0)}%`;
}

/** Result view: per-waypoint tolerance bands colored by how tight they are. */
export function renderResult(container: HTMLElement,
                             result: RefinementResultDoc): void {
  const rows = result.tau_r.map((tau, i) => {
    const eps = result.tolerances.eps_p[i][0];
    return { tau, eps, theta: result.tolerances.eps_theta[i] };
  });
  const epsMin = Math.min(...rows.map((r) => r.eps));
  const epsMax = Math.max(...rows.map((r) => r.eps));
  const span = epsMax - epsMin || 1e-9;
  container.innerHTML = "<h3>extracted schedule and tolerances</h3>";
  const table = document.createElement("table");
  table.innerHTML =
    "<tr><th>#</th><th>timing</th><th>pos tol [m]</th><th>angle tol [rad]</th></tr>";
  rows.forEach((r, i) => {
    const tr = document.createElement("tr");
    // tight waypoints hot, loose waypoints cool
    const heat = Math.round(255 * (1 - (r.eps - epsMin) / span));
    tr.innerHTML = `<td>${i + 1}</td><td>${r.tau.toFixed(4)}</td>` +
      `<td style="background: rgba(${heat},${255 - heat},96,0.35)">` +
      `${r.eps.toFixed(4)}</td><td>${r.theta.toFixed(3)}</td>`;
    table.appendChild(tr);
  });
  container.appendChild(table);
}

export function showBanner(el: HTMLElement, text: string): void {
  el.textContent = text;
  el.style.display = text ? "block" : "none";
}
