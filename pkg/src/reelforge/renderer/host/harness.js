"use strict";
(() => {
  // src/harness.ts
  var GLOBAL_KEY = "__reelclock__";
  function createHarness(global) {
    let installed = false;
    let nowMs = 0;
    let nextId = 1;
    let nextSeq = 1;
    const pending = /* @__PURE__ */ new Map();
    const violations = /* @__PURE__ */ new Map();
    const callbackErrors = [];
    const RealDate = global.Date;
    function recordViolation(apiName) {
      violations.set(apiName, (violations.get(apiName) ?? 0) + 1);
    }
    function schedule(callback, delay, args, repeating) {
      const delayMs = Math.max(0, Math.floor(Number(delay) || 0));
      const id = nextId++;
      pending.set(id, {
        id,
        dueMs: nowMs + delayMs,
        seq: nextSeq++,
        repeating,
        periodMs: repeating ? Math.max(1, delayMs) : void 0,
        callback: typeof callback === "function" ? callback : () => {
        },
        args
      });
      return id;
    }
    function popDue(limitMs) {
      let best = null;
      for (const rec of pending.values()) {
        if (rec.dueMs > limitMs) continue;
        if (best === null || rec.dueMs < best.dueMs || rec.dueMs === best.dueMs && rec.seq < best.seq) {
          best = rec;
        }
      }
      if (best !== null) pending.delete(best.id);
      return best;
    }
    function install() {
      if (installed) return;
      installed = true;
      global.setTimeout = (cb, delay, ...args) => schedule(cb, delay, args, false);
      global.setInterval = (cb, delay, ...args) => schedule(cb, delay, args, true);
      global.clearTimeout = (id) => {
        pending.delete(Number(id));
      };
      global.clearInterval = global.clearTimeout;
      global.requestAnimationFrame = (_cb) => {
        recordViolation("requestAnimationFrame");
        return 0;
      };
      global.cancelAnimationFrame = () => {
        recordViolation("cancelAnimationFrame");
      };
      const VirtualDate = function(...args) {
        if (args.length === 0) {
          return new RealDate(nowMs);
        }
        return new RealDate(...args);
      };
      VirtualDate.prototype = RealDate.prototype;
      VirtualDate.now = () => nowMs;
      VirtualDate.parse = RealDate.parse;
      VirtualDate.UTC = RealDate.UTC;
      global.Date = VirtualDate;
      if (global.performance) {
        try {
          global.performance.now = () => nowMs;
        } catch {
        }
      }
    }
    function advance(deltaMs) {
      const delta = Math.floor(Number(deltaMs));
      if (!(delta > 0)) return 0;
      const target = nowMs + delta;
      let fired = 0;
      for (; ; ) {
        const rec = popDue(target);
        if (rec === null) break;
        nowMs = Math.max(nowMs, rec.dueMs);
        if (rec.repeating && rec.periodMs !== void 0) {
          pending.set(rec.id, { ...rec, dueMs: rec.dueMs + rec.periodMs, seq: nextSeq++ });
        }
        try {
          rec.callback.apply(void 0, rec.args);
        } catch (err) {
          callbackErrors.push(String(err));
        }
        fired++;
      }
      nowMs = target;
      return fired;
    }
    function report() {
      const entries = [];
      for (const [apiName, count] of violations) {
        entries.push({ apiName, count });
      }
      return {
        nowMs,
        pending: pending.size,
        violations: entries,
        callbackErrors: callbackErrors.slice()
      };
    }
    return { install, advance, report };
  }
  function installHarness(global) {
    if (global[GLOBAL_KEY]) {
      return global[GLOBAL_KEY];
    }
    const harness = createHarness(global);
    harness.install();
    global[GLOBAL_KEY] = harness;
    return harness;
  }
  if (typeof window !== "undefined") {
    installHarness(window);
  }
})();
