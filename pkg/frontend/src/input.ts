// Keyboard and pointer capture. Selection keys are the digit row and the
// numpad, 1/2/3 only; everything else flashes the key legend. The operator
// axis comes from pointer drag or arrow keys, normalized to [-1, 1].

export type KeyHandler = (key: 1 | 2 | 3) => void;
export type AxisHandler = (axis: number) => void;

interface KeyEventLike {
  code: string;
  repeat?: boolean;
}

const KEY_CODES: Record<string, 1 | 2 | 3> = {
  Digit1: 1, Numpad1: 1,
  Digit2: 2, Numpad2: 2,
  Digit3: 3, Numpad3: 3,
};

export class SelectionKeys {
  private held = new Set<string>();

  constructor(
    private readonly onSelect: KeyHandler,
    private readonly onUnknownKey: () => void = () => {},
  ) {}

  keydown(event: KeyEventLike): void {
    const key = KEY_CODES[event.code];
    if (key === undefined) {
      this.onUnknownKey();
      return;
    }
    // suppress browser auto-repeat and re-fires while held
    if (event.repeat || this.held.has(event.code)) return;
    this.held.add(event.code);
    this.onSelect(key);
  }

  keyup(event: KeyEventLike): void {
    this.held.delete(event.code);
  }
}

export function clampAxis(value: number): number {
  return Math.max(-1, Math.min(1, value));
}

/** Pointer x within a drag area of `width` pixels, mapped to [-1, 1]. */
export function pointerToAxis(x: number, width: number): number {
  return clampAxis(((x / width) - 0.5) * 2);
}

export class ArrowAxis {
  private value = 0;

  constructor(
    private readonly onAxis: AxisHandler,
    private readonly step = 0.1,
  ) {}

  keydown(event: KeyEventLike): void {
    if (event.code === "ArrowLeft") this.move(-this.step);
    else if (event.code === "ArrowRight") this.move(this.step);
  }

  private move(delta: number): void {
    this.value = clampAxis(this.value + delta);
    this.onAxis(this.value);
  }
}
