#!/usr/bin/env node
// Deterministic document host: loads an animation document in jsdom with the
// virtual-clock harness installed before any document script runs, then
// answers newline-delimited JSON commands on stdin (load / advance /
// screenshot / probe / report / close).
//
// Requires jsdom and @resvg/resvg-js (see package.json in this directory).

"use strict";

const fs = require("fs");
const path = require("path");
const readline = require("readline");

const { JSDOM, VirtualConsole, requestInterceptor } = require("jsdom");
const { Resvg } = require("@resvg/resvg-js");

const HARNESS_PATH = path.join(__dirname, "harness.js");

let state = null; // { dom, harness, networkLog, blocked, pageErrors }

function makeInterceptor(opts) {
  // allowed-origin assets are served from the vendored copy in offline mode;
  // every other request is refused: nothing ships beside the document
  return requestInterceptor((request) => {
    opts.networkLog.push(request.url);
    let origin;
    try {
      origin = new URL(request.url).origin;
    } catch {
      origin = null;
    }
    if (origin && opts.allowedOrigins.includes(origin)) {
      if (opts.d3Path) {
        return new Response(fs.readFileSync(opts.d3Path, "utf8"), {
          headers: { "Content-Type": "application/javascript" },
        });
      }
      return undefined; // online mode: let the request reach the network
    }
    opts.blocked.push(request.url);
    return new Response("", { status: 403 });
  });
}

function handleLoad(msg) {
  const harnessSource = fs.readFileSync(HARNESS_PATH, "utf8");
  const networkLog = [];
  const blocked = [];
  const pageErrors = [];

  const virtualConsole = new VirtualConsole();
  virtualConsole.on("jsdomError", (err) => {
    if (err && err.type === "resource-loading") {
      return; // already recorded as blocked; not fatal by itself
    }
    const cause = err && err.cause ? `: ${err.cause}` : "";
    pageErrors.push(`${err && err.message}${cause}`);
  });

  const dom = new JSDOM(msg.html, {
    url: "https://reel.invalid/",
    runScripts: "dangerously",
    pretendToBeVisual: false,
    resources: {
      interceptors: [
        makeInterceptor({
          networkLog,
          blocked,
          allowedOrigins: msg.allowed_origins || [],
          d3Path: msg.offline ? msg.d3_path : null,
        }),
      ],
    },
    virtualConsole,
    beforeParse(window) {
      // harness must be active before the first document script executes
      window.eval(harnessSource);
    },
  });

  const harness = dom.window.__reelclock__;
  if (!harness) {
    throw new Error("harness failed to install");
  }
  state = { dom, harness, networkLog, blocked, pageErrors };

  // external scripts resolve asynchronously; wait for the load event so every
  // document script has run before the first advance or capture
  return new Promise((resolve, reject) => {
    const finish = () => {
      if (pageErrors.length > 0) {
        reject(new Error(`document script error during load: ${pageErrors[0]}`));
      } else {
        resolve({});
      }
    };
    if (dom.window.document.readyState === "complete") {
      finish();
    } else {
      dom.window.addEventListener("load", finish);
      dom.window.addEventListener("error", finish);
    }
  });
}

function requireState() {
  if (!state) throw new Error("no document loaded");
  return state;
}

function handleAdvance(msg) {
  const { harness } = requireState();
  const fired = harness.advance(msg.delta_ms);
  return { fired };
}

function serializeChartSvg(document, window) {
  const svg = document.querySelector("svg#chart");
  if (!svg) throw new Error("screenshot failed: no svg#chart element");
  const serializer = new window.XMLSerializer();
  return serializer.serializeToString(svg);
}

function handleScreenshot() {
  const { dom } = requireState();
  const svgText = serializeChartSvg(dom.window.document, dom.window);
  const resvg = new Resvg(svgText, {
    fitTo: { mode: "original" },
    font: { loadSystemFonts: true },
  });
  const png = resvg.render().asPng();
  return { png_b64: Buffer.from(png).toString("base64") };
}

function handleProbe(msg) {
  const { dom } = requireState();
  const el = dom.window.document.querySelector(msg.selector);
  if (!el) throw new Error(`no match for selector ${msg.selector}`);
  if (!el.hasAttribute(msg.attribute)) {
    throw new Error(`attribute ${msg.attribute} absent on ${msg.selector}`);
  }
  return { value: el.getAttribute(msg.attribute) };
}

function handleReport() {
  const { harness, networkLog, blocked, pageErrors } = requireState();
  return {
    report: harness.report(),
    network: networkLog.slice(),
    blocked: blocked.slice(),
    page_errors: pageErrors.slice(),
  };
}

const handlers = {
  load: handleLoad,
  advance: handleAdvance,
  screenshot: handleScreenshot,
  probe: handleProbe,
  report: handleReport,
};

const rl = readline.createInterface({ input: process.stdin, terminal: false });
rl.on("line", (line) => {
  if (!line.trim()) return;
  let msg;
  try {
    msg = JSON.parse(line);
  } catch (err) {
    process.stdout.write(JSON.stringify({ ok: false, error: `bad command: ${err}` }) + "\n");
    return;
  }
  if (msg.cmd === "close") {
    process.exit(0);
  }
  const handler = handlers[msg.cmd];
  if (!handler) {
    process.stdout.write(JSON.stringify({ ok: false, error: `unknown command ${msg.cmd}` }) + "\n");
    return;
  }
  Promise.resolve()
    .then(() => handler(msg))
    .then((result) => {
      process.stdout.write(JSON.stringify({ ok: true, ...result }) + "\n");
    })
    .catch((err) => {
      process.stdout.write(JSON.stringify({ ok: false, error: String(err.message || err) }) + "\n");
    });
});
