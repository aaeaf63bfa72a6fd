/** Drag-rate limiter: trailing-edge debounce capped at one call per interval,
 * with an immediate flush on drop.  Timer functions are injectable so tests
 * can run on fake clocks. */

export interface DragSchedulerOptions {
  intervalMs?: number;
  setTimeoutFn?: (cb: () => void, ms: number) => ReturnType<typeof setTimeout>;
  clearTimeoutFn?: (id: ReturnType<typeof setTimeout>) => void;
  now?: () => number;
}

export class DragScheduler<T> {
  private intervalMs: number;
  private setT: (cb: () => void, ms: number) => ReturnType<typeof setTimeout>;
  private clearT: (id: ReturnType<typeof setTimeout>) => void;
  private now: () => number;
  private pending: T | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastFire: number | null = null;

  constructor(private fire: (value: T, final: boolean) => void,
              opts: DragSchedulerOptions = {}) {
    this.intervalMs = opts.intervalMs ?? 250;
    this.setT = opts.setTimeoutFn ?? ((cb, ms) => setTimeout(cb, ms));
    this.clearT = opts.clearTimeoutFn ?? ((id) => clearTimeout(id));
    this.now = opts.now ?? (() => Date.now());
  }

  /** Called on every drag movement; trailing-edge fire at most once per
   * interval (the first fire also waits out a full interval). */
  move(value: T): void {
    this.pending = value;
    if (this.timer !== null) {
      return;
    }
    if (this.lastFire === null) {
      this.lastFire = this.now();
    }
    const wait = Math.max(0, this.lastFire + this.intervalMs - this.now());
    this.timer = this.setT(() => {
      this.timer = null;
      if (this.pending !== null) {
        const v = this.pending;
        this.pending = null;
        this.lastFire = this.now();
        this.fire(v, false);
      }
    }, wait);
  }

  /** Called when the drag ends; always fires immediately. */
  drop(value: T): void {
    if (this.timer !== null) {
      this.clearT(this.timer);
      this.timer = null;
    }
    this.pending = null;
    this.lastFire = this.now();
    this.fire(value, true);
  }
}
