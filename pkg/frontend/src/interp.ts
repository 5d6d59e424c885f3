// Tick buffering and interpolation. The render loop runs faster than the
// server's tick rate, so frames sample the buffered stream a small delay
// behind the newest tick and interpolate linearly between neighbors.

export interface Sample {
  t: number;
  values: Record<string, number>;
}

export class TickBuffer {
  private samples: Sample[] = [];
  private readonly capacity: number;

  constructor(capacity = 240) {
    this.capacity = capacity;
  }

  get latest(): Sample | null {
    return this.samples.length ? this.samples[this.samples.length - 1] : null;
  }

  get size(): number {
    return this.samples.length;
  }

  /** Insert a tick; stale (non-increasing t) ticks are dropped. */
  push(t: number, values: Record<string, number>): boolean {
    const last = this.latest;
    if (last !== null && t <= last.t) return false;
    this.samples.push({ t, values });
    if (this.samples.length > this.capacity) {
      this.samples.splice(0, this.samples.length - this.capacity);
    }
    return true;
  }

  /**
   * Linearly interpolated values at trial time `t`. Before the first tick
   * returns the first tick's values; past the newest, the newest (hold).
   * Keys missing from either neighbor are held from the earlier one.
   */
  sampleAt(t: number): Record<string, number> | null {
    const n = this.samples.length;
    if (n === 0) return null;
    if (t <= this.samples[0].t) return { ...this.samples[0].values };
    if (t >= this.samples[n - 1].t) return { ...this.samples[n - 1].values };
    let lo = 0;
    let hi = n - 1;
    while (hi - lo > 1) {
      const mid = (lo + hi) >> 1;
      if (this.samples[mid].t <= t) lo = mid;
      else hi = mid;
    }
    const a = this.samples[lo];
    const b = this.samples[hi];
    const w = (t - a.t) / (b.t - a.t);
    const out: Record<string, number> = {};
    for (const key of Object.keys(a.values)) {
      const va = a.values[key];
      const vb = b.values[key];
      out[key] = vb === undefined ? va : va + w * (vb - va);
    }
    return out;
  }
}

/**
 * Maps wall-clock render timestamps onto the trial clock, holding a fixed
 * interpolation delay behind the newest tick.
 */
export class RenderClock {
  private offset: number | null = null; // trialTime - wallSeconds

  constructor(private readonly delay: number) {}

  observe(tickT: number, wallSeconds: number): void {
    const candidate = tickT - wallSeconds;
    // track the largest offset so delivery jitter never rewinds the clock
    if (this.offset === null || candidate > this.offset) {
      this.offset = candidate;
    }
  }

  renderTime(wallSeconds: number): number | null {
    if (this.offset === null) return null;
    return wallSeconds + this.offset - this.delay;
  }
}
