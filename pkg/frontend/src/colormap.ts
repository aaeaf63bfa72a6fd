/** Fixed perceptual colormap (viridis anchors, linear interpolation). */

const STOPS: [number, number, number][] = [
  [68, 1, 84],
  [72, 36, 117],
  [65, 68, 135],
  [53, 95, 141],
  [42, 120, 142],
  [33, 145, 140],
  [53, 183, 121],
  [144, 215, 67],
  [253, 231, 37],
];

/** Map a value in [0, 1] to an RGB triple; out-of-range values clamp. */
export function colormap(value: number): [number, number, number] {
  const v = Math.min(1, Math.max(0, value));
  const x = v * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(x));
  const t = x - i;
  const a = STOPS[i];
  const b = STOPS[i + 1];
  return [
    Math.round(a[0] + t * (b[0] - a[0])),
    Math.round(a[1] + t * (b[1] - a[1])),
    Math.round(a[2] + t * (b[2] - a[2])),
  ];
}

/** Evenly spaced legend entries from 0 to 1 with their colors. */
export function legendStops(count: number): { value: number; rgb: [number, number, number] }[] {
  const out = [];
  for (let i = 0; i < count; i++) {
    const value = i / (count - 1);
    out.push({ value, rgb: colormap(value) });
  }
  return out;
}
