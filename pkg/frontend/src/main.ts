/** DOM shell for the coverage planner: drag the transmitter over the scene
 * footprint and watch the predicted heatmap update. */

import { PredictClient } from './api.js';
import { DragScheduler } from './debounce.js';
import { cellOf, dbLabel, renderHeatmapPixels } from './heatmap.js';
import { legendStops } from './colormap.js';
import {
  appendHistory, applyError, applyPrediction, initialState, issueRequest,
  placeTransmitter,
} from './state.js';
import type { PlannerState, PredictResponse } from './types.js';

const DRAG_RESOLUTION = 64;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class PlannerApp {
  private state: PlannerState = initialState();
  private client: PredictClient;
  private canvas = el<HTMLCanvasElement>('map');
  private ctx = this.canvas.getContext('2d')!;
  private scratch = document.createElement('canvas');
  private dragging = false;
  private scheduler: DragScheduler<[number, number, number]>;

  constructor(baseUrl: string) {
    this.client = new PredictClient(baseUrl);
    this.scheduler = new DragScheduler((pos, final) => this.request(pos, final),
                                       { intervalMs: 250 });
  }

  async start(): Promise<void> {
    try {
      const health = await this.client.health();
      const scene = await this.client.scene();
      this.state = { ...this.state, bounds: scene.bounds, scene };
      el<HTMLSpanElement>('model-hash').textContent = health.model_hash.slice(0, 12);
      const c = this.state.bounds!;
      this.state = placeTransmitter(this.state, [
        (c.min[0] + c.max[0]) / 2, (c.min[1] + c.max[1]) / 2,
        Math.min(c.max[2], 10),
      ]);
      this.bindControls();
      this.hideBanner();
      this.request(this.state.tx, true);
    } catch (err) {
      this.showBanner(`server unreachable: ${err}`);
    }
  }

  private bindControls(): void {
    const pattern = el<HTMLSelectElement>('pattern');
    pattern.onchange = () => {
      this.state = { ...this.state, patternId: Number(pattern.value) };
      this.request(this.state.tx, true);
    };
    const height = el<HTMLSelectElement>('height');
    height.onchange = () => {
      this.state = { ...this.state, height: Number(height.value) };
      this.request(this.state.tx, true);
    };
    const resolution = el<HTMLSelectElement>('resolution');
    resolution.value = String(this.state.resolution);
    resolution.onchange = () => {
      this.state = { ...this.state, resolution: Number(resolution.value) };
      this.request(this.state.tx, true);
    };
    const probes = el<HTMLInputElement>('show-probes');
    probes.onchange = () => {
      this.state = { ...this.state, showProbes: probes.checked };
      this.draw();
    };
    el<HTMLButtonElement>('retry').onclick = () => {
      this.hideBanner();
      this.start();
    };

    this.canvas.addEventListener('mousedown', (ev) => {
      this.dragging = true;
      this.moveTx(ev, false);
    });
    this.canvas.addEventListener('mousemove', (ev) => {
      if (this.dragging) this.moveTx(ev, false);
    });
    window.addEventListener('mouseup', (ev) => {
      if (this.dragging) {
        this.dragging = false;
        if (ev.target === this.canvas) this.moveTx(ev as MouseEvent, true);
        else this.scheduler.drop(this.state.tx);
      }
    });
    this.canvas.addEventListener('click', (ev) => {
      if (!this.dragging && ev.shiftKey) this.queryPoint(ev);
    });
    this.canvas.addEventListener('dblclick', (ev) => this.queryPoint(ev));
  }

  private pixelToWorld(ev: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const b = this.state.bounds!;
    const fx = (ev.clientX - rect.left) / rect.width;
    const fy = 1 - (ev.clientY - rect.top) / rect.height; // canvas top = max y
    return [
      b.min[0] + fx * (b.max[0] - b.min[0]),
      b.min[1] + fy * (b.max[1] - b.min[1]),
    ];
  }

  private moveTx(ev: MouseEvent, final: boolean): void {
    const [x, y] = this.pixelToWorld(ev);
    this.state = placeTransmitter(this.state, [x, y, this.state.tx[2]]);
    this.draw();
    if (final) this.scheduler.drop(this.state.tx);
    else this.scheduler.move(this.state.tx);
  }

  private request(tx: [number, number, number], final: boolean): void {
    const [next, seq] = issueRequest(this.state);
    this.state = next;
    const { response } = this.client.predict({
      tx,
      pattern_id: this.state.patternId,
      height: this.state.height,
      resolution: final ? this.state.resolution : DRAG_RESOLUTION,
    });
    response
      .then((resp: PredictResponse) => {
        this.state = applyPrediction(this.state, seq, resp);
        this.draw();
        el<HTMLSpanElement>('elapsed').textContent = `${resp.elapsed_ms.toFixed(0)} ms`;
      })
      .catch((err: Error) => {
        this.state = applyError(this.state, String(err));
        this.showBanner(String(err));
      });
  }

  private queryPoint(ev: MouseEvent): void {
    const [x, y] = this.pixelToWorld(ev);
    const pos: [number, number, number] = [x, y, this.state.height];
    const { response } = this.client.predict({
      tx: this.state.tx,
      pattern_id: this.state.patternId,
      height: this.state.height,
      resolution: 8,
      point_queries: [pos],
    });
    response
      .then((resp) => {
        const pr = resp.point_results[0];
        this.state = appendHistory(this.state, {
          position: pr.position, p_norm: pr.p_norm, p_db: pr.p_db,
        });
        el<HTMLSpanElement>('readout').textContent =
          `(${x.toFixed(1)}, ${y.toFixed(1)}): ${pr.p_db.toFixed(1)} dB`;
        this.renderHistory();
      })
      .catch((err) => this.showBanner(String(err)));
  }

  private renderHistory(): void {
    const rows = this.state.history
      .map((h) => `<tr><td>(${h.position[0].toFixed(1)}, ${h.position[1].toFixed(1)})` +
                  `</td><td>${h.p_norm.toFixed(4)}</td><td>${h.p_db.toFixed(1)} dB</td></tr>`)
      .join('');
    el<HTMLTableSectionElement>('history-body').innerHTML = rows;
  }

  private draw(): void {
    const { map, scene, bounds } = this.state;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (map) {
      const pixels = renderHeatmapPixels(map.values, map.resolution) as
        Uint8ClampedArray<ArrayBuffer>;
      this.scratch.width = map.resolution;
      this.scratch.height = map.resolution;
      this.scratch.getContext('2d')!
        .putImageData(new ImageData(pixels, map.resolution, map.resolution), 0, 0);
      ctx.save();
      ctx.imageSmoothingEnabled = false;
      ctx.scale(1, -1); // row 0 holds min-y; display north-up
      ctx.drawImage(this.scratch, 0, -this.canvas.height,
                    this.canvas.width, this.canvas.height);
      ctx.restore();
      this.drawLegend(map.pMinDb, map.pMaxDb);
    }
    if (scene && bounds) {
      this.drawFootprints();
      if (this.state.showProbes) this.drawProbes();
      this.drawTx();
    }
  }

  private worldToPixel(x: number, y: number): [number, number] {
    const b = this.state.bounds!;
    return [
      ((x - b.min[0]) / (b.max[0] - b.min[0])) * this.canvas.width,
      (1 - (y - b.min[1]) / (b.max[1] - b.min[1])) * this.canvas.height,
    ];
  }

  private drawFootprints(): void {
    const ctx = this.ctx;
    ctx.strokeStyle = '#202020';
    ctx.lineWidth = 1.5;
    for (const f of this.state.scene!.footprints) {
      ctx.beginPath();
      f.xy.forEach(([x, y], i) => {
        const [px, py] = this.worldToPixel(x, y);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      });
      ctx.closePath();
      ctx.stroke();
    }
  }

  private drawProbes(): void {
    const ctx = this.ctx;
    ctx.fillStyle = 'rgba(255,255,255,0.85)';
    for (const [x, y] of this.state.scene!.probes) {
      const [px, py] = this.worldToPixel(x, y);
      ctx.beginPath();
      ctx.arc(px, py, 1.6, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  private drawTx(): void {
    const [px, py] = this.worldToPixel(this.state.tx[0], this.state.tx[1]);
    const ctx = this.ctx;
    ctx.fillStyle = '#ff3333';
    ctx.strokeStyle = 'white';
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(px, py, 7, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
  }

  private drawLegend(pMinDb: number, pMaxDb: number): void {
    const legend = el<HTMLCanvasElement>('legend');
    const ctx = legend.getContext('2d')!;
    ctx.clearRect(0, 0, legend.width, legend.height);
    const stops = legendStops(legend.width);
    stops.forEach((s, i) => {
      ctx.fillStyle = `rgb(${s.rgb[0]},${s.rgb[1]},${s.rgb[2]})`;
      ctx.fillRect(i, 0, 1, legend.height);
    });
    el<HTMLSpanElement>('legend-min').textContent = dbLabel(0, pMinDb, pMaxDb);
    el<HTMLSpanElement>('legend-max').textContent = dbLabel(1, pMinDb, pMaxDb);
  }

  private showBanner(message: string): void {
    const banner = el<HTMLDivElement>('banner');
    banner.style.display = 'flex';
    el<HTMLSpanElement>('banner-text').textContent = message;
  }

  private hideBanner(): void {
    el<HTMLDivElement>('banner').style.display = 'none';
  }
}

const params = new URLSearchParams(window.location.search);
const base = params.get('server') ?? 'http://127.0.0.1:8080';
new PlannerApp(base).start();

export { PlannerApp, cellOf };
