/** Pure heatmap rasterization: server values -> RGBA pixels.
 *
 * The server sends row-major values: values[i * res + j] is the cell at
 * y-row i, x-column j.  Pixel (row i, col j) of the output buffer maps to
 * exactly that cell, so the buffer agrees with the wire format index for
 * index.  The y axis is NOT flipped here; the canvas layer decides
 * orientation when scaling up.
 */

import { colormap } from './colormap.js';

export function renderHeatmapPixels(values: ArrayLike<number>, resolution: number): Uint8ClampedArray {
  if (values.length !== resolution * resolution) {
    throw new Error(`expected ${resolution * resolution} values, got ${values.length}`);
  }
  const out = new Uint8ClampedArray(resolution * resolution * 4);
  for (let idx = 0; idx < values.length; idx++) {
    const [r, g, b] = colormap(values[idx]);
    out[idx * 4] = r;
    out[idx * 4 + 1] = g;
    out[idx * 4 + 2] = b;
    out[idx * 4 + 3] = 255;
  }
  return out;
}

/** dB label for a normalized value given the normalization bounds. */
export function dbLabel(value: number, pMinDb: number, pMaxDb: number): string {
  const db = pMinDb + value * (pMaxDb - pMinDb);
  return `${db.toFixed(1)} dB`;
}

/** Map a cell (row, col) to the world-space cell center. */
export function cellCenter(
  row: number, col: number, resolution: number,
  bounds: { min: [number, number, number]; max: [number, number, number] },
): [number, number] {
  const x = bounds.min[0] + ((col + 0.5) * (bounds.max[0] - bounds.min[0])) / resolution;
  const y = bounds.min[1] + ((row + 0.5) * (bounds.max[1] - bounds.min[1])) / resolution;
  return [x, y];
}

/** Map a world-space position to the enclosing cell (row, col). */
export function cellOf(
  x: number, y: number, resolution: number,
  bounds: { min: [number, number, number]; max: [number, number, number] },
): [number, number] {
  const fx = (x - bounds.min[0]) / (bounds.max[0] - bounds.min[0]);
  const fy = (y - bounds.min[1]) / (bounds.max[1] - bounds.min[1]);
  const col = Math.min(resolution - 1, Math.max(0, Math.floor(fx * resolution)));
  const row = Math.min(resolution - 1, Math.max(0, Math.floor(fy * resolution)));
  return [row, col];
}
