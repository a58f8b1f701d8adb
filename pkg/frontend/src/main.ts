/** Entry point: wire the connection, input polling, and render loop.
 * Server address comes from the ?server= query parameter, defaulting to
 * port 8090 on the page's host.
 */

import { TeleopClient } from "./client.js";
import {
  KEY_BINDINGS,
  emptyKeyState,
  gamepadAction,
  keyboardAction,
  rampSpeed,
} from "./input.js";
import { drawScene } from "./render.js";

function serverUrl(): string {
  const param = new URLSearchParams(window.location.search).get("server");
  if (param) return param;
  const host = window.location.hostname || "127.0.0.1";
  return `ws://${host}:8090`;
}

function start(): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const recordButton = document.getElementById("record") as HTMLButtonElement;
  let status = "starting";

  const client = new TeleopClient(serverUrl(), (url) => new WebSocket(url), {
    onStatus: (s) => {
      status = s;
    },
  });
  client.connect();

  const keys = emptyKeyState();
  window.addEventListener("keydown", (e) => {
    const key = KEY_BINDINGS[e.code];
    if (key) {
      keys[key] = true;
      e.preventDefault();
    }
  });
  window.addEventListener("keyup", (e) => {
    const key = KEY_BINDINGS[e.code];
    if (key) keys[key] = false;
  });

  recordButton.addEventListener("click", () => {
    const on = !(client.latestFrame?.recording ?? false);
    if (client.setRecording(on)) {
      recordButton.textContent = on ? "stop recording" : "start recording";
    }
  });

  let speed = 0;
  let lastInputAt = performance.now();
  setInterval(() => {
    const now = performance.now();
    const dt = (now - lastInputAt) / 1000;
    lastInputAt = now;
    const pad = navigator.getGamepads?.()[0];
    if (pad && pad.axes.length >= 2) {
      client.sendAction(gamepadAction(pad.axes[0], pad.axes[1]));
    } else {
      speed = rampSpeed(speed, keys, dt);
      client.sendAction(keyboardAction(speed, keys));
    }
  }, 50);

  const render = () => {
    drawScene(ctx, canvas.width, canvas.height, client.latestFrame, status);
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

window.addEventListener("DOMContentLoaded", start);
