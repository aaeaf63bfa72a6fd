import { describe, expect, it } from 'vitest';

import { colormap } from '../src/colormap.js';
import { cellCenter, cellOf, dbLabel, renderHeatmapPixels } from '../src/heatmap.js';

// Independent copy of the anchor table: the golden test must not recompute
// expectations through the code under test.
const GOLDEN_STOPS: [number, number, number][] = [
  [68, 1, 84], [72, 36, 117], [65, 68, 135], [53, 95, 141], [42, 120, 142],
  [33, 145, 140], [53, 183, 121], [144, 215, 67], [253, 231, 37],
];

describe('golden-image heatmap', () => {
  it('renders the 4x4 fixture map to the expected RGBA buffer', () => {
    // values at exact anchor positions plus clamped out-of-range entries
    const values = [
      0, 0.125, 0.25, 0.375,
      0.5, 0.625, 0.75, 0.875,
      1.0, 0, 1.0, 0.5,
      -0.25, 1.25, 0.125, 0.875,
    ];
    const anchorIndex = [0, 1, 2, 3, 4, 5, 6, 7, 8, 0, 8, 4, 0, 8, 1, 7];
    const expected = new Uint8ClampedArray(4 * 4 * 4);
    anchorIndex.forEach((a, i) => {
      expected[i * 4] = GOLDEN_STOPS[a][0];
      expected[i * 4 + 1] = GOLDEN_STOPS[a][1];
      expected[i * 4 + 2] = GOLDEN_STOPS[a][2];
      expected[i * 4 + 3] = 255;
    });
    const got = renderHeatmapPixels(values, 4);
    expect(Array.from(got)).toEqual(Array.from(expected));
  });

  it('maps pixel (i, j) to values[i * res + j]', () => {
    // a single bright cell at row 2, col 1 of a 4x4 map
    const values = new Array(16).fill(0);
    values[2 * 4 + 1] = 1.0;
    const pixels = renderHeatmapPixels(values, 4);
    const offset = (2 * 4 + 1) * 4;
    expect([pixels[offset], pixels[offset + 1], pixels[offset + 2]])
      .toEqual([253, 231, 37]);
    // every other pixel is the zero color
    for (let idx = 0; idx < 16; idx++) {
      if (idx === 9) continue;
      expect(pixels[idx * 4]).toBe(68);
    }
  });

  it('uniform mid-scale map renders a single color', () => {
    const pixels = renderHeatmapPixels(new Array(16).fill(0.5), 4);
    for (let idx = 0; idx < 16; idx++) {
      expect(pixels[idx * 4]).toBe(42);
      expect(pixels[idx * 4 + 1]).toBe(120);
      expect(pixels[idx * 4 + 2]).toBe(142);
    }
  });

  it('rejects mismatched value counts', () => {
    expect(() => renderHeatmapPixels([1, 2, 3], 4)).toThrow();
  });

  it('interpolates between anchors', () => {
    const mid = colormap(0.0625); // halfway between stops 0 and 1
    expect(mid).toEqual([70, 19, 101]);
  });
});

describe('legend labels', () => {
  it('endpoints carry the normalization bounds in dB', () => {
    expect(dbLabel(0, -160, -50)).toBe('-160.0 dB');
    expect(dbLabel(1, -160, -50)).toBe('-50.0 dB');
    expect(dbLabel(0.5, -160, -50)).toBe('-105.0 dB');
  });
});

describe('cell mapping', () => {
  const bounds = { min: [-30, -30, 0] as [number, number, number],
                   max: [30, 30, 20] as [number, number, number] };

  it('cellCenter and cellOf are inverse on cell centers', () => {
    for (const [row, col] of [[0, 0], [3, 9], [15, 15], [7, 2]] as const) {
      const [x, y] = cellCenter(row, col, 16, bounds);
      expect(cellOf(x, y, 16, bounds)).toEqual([row, col]);
    }
  });

  it('clamps outside positions to edge cells', () => {
    expect(cellOf(-999, -999, 16, bounds)).toEqual([0, 0]);
    expect(cellOf(999, 999, 16, bounds)).toEqual([15, 15]);
  });
});
