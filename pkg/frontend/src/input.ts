// Brake input aggregation. All sources write into one latest-value cell in
// [-1, 0]; the protocol layer samples it on its own clock.

export class BrakeCell {
  private value = 0;

  set(v: number): void {
    this.value = Math.min(0, Math.max(-1, v));
  }

  release(): void {
    this.value = 0;
  }

  read(): number {
    return this.value;
  }
}

/** Pointer-hold slider: holding lower on the element brakes harder. */
export function attachPointerBrake(el: HTMLElement, cell: BrakeCell): () => void {
  let held = false;

  const update = (ev: PointerEvent) => {
    const rect = el.getBoundingClientRect();
    const frac = (ev.clientY - rect.top) / Math.max(1, rect.height);
    cell.set(-Math.min(1, Math.max(0, frac)));
  };
  const down = (ev: PointerEvent) => {
    held = true;
    el.setPointerCapture(ev.pointerId);
    update(ev);
  };
  const move = (ev: PointerEvent) => {
    if (held) update(ev);
  };
  const up = () => {
    held = false;
    cell.release();
  };

  el.addEventListener("pointerdown", down);
  el.addEventListener("pointermove", move);
  el.addEventListener("pointerup", up);
  el.addEventListener("pointercancel", up);
  return () => {
    el.removeEventListener("pointerdown", down);
    el.removeEventListener("pointermove", move);
    el.removeEventListener("pointerup", up);
    el.removeEventListener("pointercancel", up);
  };
}

/** Spacebar as a full-brake button: hold = -1, release = 0. */
export function attachKeyboardBrake(target: EventTarget, cell: BrakeCell): () => void {
  const down = (ev: Event) => {
    if ((ev as KeyboardEvent).code === "Space") {
      (ev as KeyboardEvent).preventDefault();
      cell.set(-1);
    }
  };
  const up = (ev: Event) => {
    if ((ev as KeyboardEvent).code === "Space") cell.release();
  };
  target.addEventListener("keydown", down);
  target.addEventListener("keyup", up);
  return () => {
    target.removeEventListener("keydown", down);
    target.removeEventListener("keyup", up);
  };
}

/** Right-trigger of the first connected gamepad, polled each frame. */
export function startGamepadBrake(cell: BrakeCell,
                                  nav: Navigator = navigator): () => void {
  let running = true;
  let engaged = false;

  const poll = () => {
    if (!running) return;
    const pad = nav.getGamepads?.()[0];
    if (pad) {
      // trigger buttons report analog values in [0, 1]
      const trigger = pad.buttons[7]?.value ?? 0;
      if (trigger > 0.02) {
        engaged = true;
        cell.set(-trigger);
      } else if (engaged) {
        engaged = false;
        cell.release();
      }
    }
    requestAnimationFrame(poll);
  };
  requestAnimationFrame(poll);
  return () => {
    running = false;
  };
}
