/**
 * In-page virtual clock harness.
 *
 * Evaluated before any document script runs. Replaces the timer and clock
 * APIs with a deterministic event-list clock that only moves when the host
 * driver calls advance(). Frame-callback APIs are recorded as violations and
 * never invoked. Exposes a single global, `window.__reelclock__`.
 */

interface TimerRecord {
  id: number;
  dueMs: number;
  seq: number;
  repeating: boolean;
  periodMs?: number;
  callback: (...args: unknown[]) => void;
  args: unknown[];
}

interface ViolationEntry {
  apiName: string;
  count: number;
}

export interface HarnessReport {
  nowMs: number;
  pending: number;
  violations: ViolationEntry[];
  callbackErrors: string[];
}

export interface Harness {
  install(): void;
  advance(deltaMs: number): number;
  report(): HarnessReport;
}

const GLOBAL_KEY = "__reelclock__";

function createHarness(global: any): Harness {
  let installed = false;
  let nowMs = 0;
  let nextId = 1;
  let nextSeq = 1;
  const pending = new Map<number, TimerRecord>();
  const violations = new Map<string, number>();
  const callbackErrors: string[] = [];

  const RealDate: DateConstructor = global.Date;

  function recordViolation(apiName: string): void {
    violations.set(apiName, (violations.get(apiName) ?? 0) + 1);
  }

  function schedule(
    callback: unknown,
    delay: unknown,
    args: unknown[],
    repeating: boolean,
  ): number {
    const delayMs = Math.max(0, Math.floor(Number(delay) || 0));
    const id = nextId++;
    pending.set(id, {
      id,
      dueMs: nowMs + delayMs,
      seq: nextSeq++,
      repeating,
      periodMs: repeating ? Math.max(1, delayMs) : undefined,
      callback: typeof callback === "function" ? (callback as TimerRecord["callback"]) : () => {},
      args,
    });
    return id;
  }

  function popDue(limitMs: number): TimerRecord | null {
    let best: TimerRecord | null = null;
    for (const rec of pending.values()) {
      if (rec.dueMs > limitMs) continue;
      if (
        best === null ||
        rec.dueMs < best.dueMs ||
        (rec.dueMs === best.dueMs && rec.seq < best.seq)
      ) {
        best = rec;
      }
    }
    if (best !== null) pending.delete(best.id);
    return best;
  }

  function install(): void {
    if (installed) return;
    installed = true;

    global.setTimeout = (cb: unknown, delay?: unknown, ...args: unknown[]) =>
      schedule(cb, delay, args, false);
    global.setInterval = (cb: unknown, delay?: unknown, ...args: unknown[]) =>
      schedule(cb, delay, args, true);
    global.clearTimeout = (id: unknown) => {
      pending.delete(Number(id));
    };
    global.clearInterval = global.clearTimeout;

    global.requestAnimationFrame = (_cb: unknown): number => {
      recordViolation("requestAnimationFrame");
      return 0; // callback is never invoked
    };
    global.cancelAnimationFrame = () => {
      recordViolation("cancelAnimationFrame");
    };

    // Wall-clock reads return the virtual epoch (0) plus virtual time.
    const VirtualDate = function (this: Date, ...args: unknown[]) {
      if (args.length === 0) {
        return new (RealDate as any)(nowMs);
      }
      return new (RealDate as any)(...args);
    } as unknown as DateConstructor;
    (VirtualDate as any).prototype = RealDate.prototype;
    (VirtualDate as any).now = () => nowMs;
    (VirtualDate as any).parse = RealDate.parse;
    (VirtualDate as any).UTC = RealDate.UTC;
    global.Date = VirtualDate;

    if (global.performance) {
      try {
        global.performance.now = () => nowMs;
      } catch {
        // some hosts freeze performance; virtual Date still covers clock reads
      }
    }
  }

  function advance(deltaMs: number): number {
    const delta = Math.floor(Number(deltaMs));
    if (!(delta > 0)) return 0;
    const target = nowMs + delta;
    let fired = 0;
    for (;;) {
      const rec = popDue(target);
      if (rec === null) break;
      nowMs = Math.max(nowMs, rec.dueMs);
      if (rec.repeating && rec.periodMs !== undefined) {
        pending.set(rec.id, { ...rec, dueMs: rec.dueMs + rec.periodMs, seq: nextSeq++ });
      }
      try {
        rec.callback.apply(undefined, rec.args);
      } catch (err) {
        callbackErrors.push(String(err));
      }
      fired++;
    }
    nowMs = target;
    return fired;
  }

  function report(): HarnessReport {
    const entries: ViolationEntry[] = [];
    for (const [apiName, count] of violations) {
      entries.push({ apiName, count });
    }
    return {
      nowMs,
      pending: pending.size,
      violations: entries,
      callbackErrors: callbackErrors.slice(),
    };
  }

  return { install, advance, report };
}

export function installHarness(global: any): Harness {
  if (global[GLOBAL_KEY]) {
    // double evaluation is a no-op: keep the existing patch layer
    return global[GLOBAL_KEY];
  }
  const harness = createHarness(global);
  harness.install();
  global[GLOBAL_KEY] = harness;
  return harness;
}

declare const window: any;
if (typeof window !== "undefined") {
  installHarness(window);
}
