// DOM wiring for the operator console.  All session logic lives in
// session.ts; this file only translates browser events and renders state.

import { fetchValidator } from "./protocol.js";
import { ConsoleSession, SocketLike } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const banner = el<HTMLDivElement>("banner");
  const view = el<HTMLImageElement>("view");
  const stateOut = el<HTMLPreElement>("state");
  const logOut = el<HTMLPreElement>("log");
  const recordBtn = el<HTMLButtonElement>("record");
  const recordName = el<HTMLInputElement>("record-name");
  const roleSel = el<HTMLSelectElement>("role");

  const base = location.origin;
  let validator;
  try {
    validator = await fetchValidator(base);
  } catch (err) {
    banner.textContent = `cannot load protocol schema: ${err}`;
    banner.className = "banner error";
    return;
  }

  const session = new ConsoleSession({
    socketFactory: (url) => new WebSocket(url) as unknown as SocketLike,
    validator,
    role: roleSel.value === "viewer" ? "viewer" : "operator",
  });

  session.onchange = () => {
    const m = session.model;
    banner.textContent = m.connected ? `connected (${m.role})` : "disconnected, retrying";
    banner.className = m.connected ? "banner ok" : "banner error";
    if (m.lastFrame) {
      view.src = `data:image/png;base64,${m.lastFrame.data}`;
    }
    const s = m.state;
    stateOut.textContent = s
      ? [
          `pan   ${s.pan.toFixed(1)} deg`,
          `tilt  ${s.tilt.toFixed(1)} deg`,
          `zoom  ${s.zoom.toFixed(2)}x`,
          `focal ${s.focal_mm.toFixed(1)} mm`,
          `drag  yaw ${m.yawDeg.toFixed(1)} pitch ${m.pitchDeg.toFixed(1)}`,
          `frame latency ${m.frameLatencyMs === null ? "-" : m.frameLatencyMs.toFixed(0) + " ms"}`,
          m.recording ? `REC ${m.recordingName ?? ""}` : "not recording",
        ].join("\n")
      : "waiting for state";
    logOut.textContent = m.log.slice(-12).join("\n");
    recordBtn.textContent = m.recording ? "stop recording" : "start recording";
    recordName.disabled = m.recording;
    const viewerLocked = m.role !== "operator";
    for (const id of ["zoom-in", "zoom-out", "hold-in", "hold-out", "record"]) {
      el<HTMLButtonElement>(id).disabled = viewerLocked;
    }
  };

  // drag on the view = rotate the virtual headset
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  view.addEventListener("pointerdown", (ev) => {
    dragging = true;
    lastX = ev.clientX;
    lastY = ev.clientY;
    view.setPointerCapture(ev.pointerId);
  });
  view.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    session.dragBy(ev.clientX - lastX, ev.clientY - lastY);
    lastX = ev.clientX;
    lastY = ev.clientY;
  });
  view.addEventListener("pointerup", () => {
    dragging = false;
  });

  el<HTMLButtonElement>("zoom-in").addEventListener("click", () => session.zoomStep(1));
  el<HTMLButtonElement>("zoom-out").addEventListener("click", () => session.zoomStep(-1));
  for (const [id, v] of [["hold-in", 1.0], ["hold-out", -1.0]] as const) {
    const btn = el<HTMLButtonElement>(id);
    btn.addEventListener("pointerdown", () => session.zoomHoldStart(v));
    btn.addEventListener("pointerup", () => session.zoomHoldEnd());
    btn.addEventListener("pointerleave", () => session.zoomHoldEnd());
  }
  window.addEventListener("keydown", (ev) => {
    if (ev.key === "+" || ev.key === "=") session.zoomStep(1);
    if (ev.key === "-" || ev.key === "_") session.zoomStep(-1);
  });

  recordBtn.addEventListener("click", () => {
    if (session.model.recording) {
      session.recordStop();
    } else {
      session.recordStart(recordName.value || "console-episode");
    }
  });

  const wsUrl = `${base.replace(/^http/, "ws")}/session`;
  session.connect(wsUrl);
}

boot().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) banner.textContent = String(err);
});
