// Horizontal-axis layout: signals move left/right, each trace in its own
// fixed lane. Signal range [-range, +range] maps to the middle 90% of the
// canvas width.

export interface Viewport {
  width: number;
  height: number;
  range: number;
}

export function signalToX(view: Viewport, value: number): number {
  const usable = 0.9 * view.width;
  const clamped = Math.max(-view.range, Math.min(view.range, value));
  return view.width / 2 + (clamped / view.range) * (usable / 2);
}

export function xToSignal(view: Viewport, x: number): number {
  const usable = 0.9 * view.width;
  const value = ((x - view.width / 2) / (usable / 2)) * view.range;
  return Math.max(-view.range, Math.min(view.range, value));
}

/** Vertical center of lane `index` out of `count` equal bands. */
export function laneY(view: Viewport, index: number, count: number): number {
  return ((index + 0.5) / count) * view.height;
}
