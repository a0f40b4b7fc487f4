// Cockpit entry point: wires the websocket session, pointer gestures, mode
// toggles, and the render loop. Commands are sent only on user gestures.

import { connect, Session } from "./net.js";
import { render } from "./render.js";
import {
  Camera,
  forceFromGesture,
  screenToWorld,
  ViewModel,
  zeroForce,
} from "./viewmodel.js";

const NEWTONS_PER_PIXEL = 0.8;
const GESTURE_RESEND_MS = 100; // re-assert the held force at 10 Hz

function wsUrl(): string {
  const param = new URLSearchParams(window.location.search).get("ws");
  if (param) return param;
  return `ws://${window.location.hostname || "127.0.0.1"}:8700/ws`;
}

function main(): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const banner = document.getElementById("banner") as HTMLElement;
  const ctx = canvas.getContext("2d")!;
  const vm = new ViewModel();
  const cam: Camera = {
    scale: 40,
    cx: 3,
    cy: 0,
    width: canvas.width,
    height: canvas.height,
  };

  const session: Session = connect(wsUrl(), {
    onSnapshot: (snap) => {
      vm.ingest(snap);
    },
    onState: (state) => {
      vm.connection = state;
      banner.textContent = state === "open" ? "" : `connection: ${state}`;
      banner.style.display = state === "open" ? "none" : "block";
    },
  });

  // drag on the canvas applies force; shift-drag twists
  let drag: { x0: number; y0: number; torque: boolean } | null = null;
  let resend: number | null = null;

  const sendGesture = (ev: PointerEvent) => {
    if (!drag || !vm.snapshot) return;
    const cmd = forceFromGesture(
      { dxPx: ev.offsetX - drag.x0, dyPx: ev.offsetY - drag.y0, torque: drag.torque },
      vm.snapshot.robot.theta,
      NEWTONS_PER_PIXEL,
    );
    session.send(cmd);
  };

  let lastEvent: PointerEvent | null = null;
  canvas.addEventListener("pointerdown", (ev) => {
    drag = { x0: ev.offsetX, y0: ev.offsetY, torque: ev.shiftKey };
    lastEvent = ev;
    canvas.setPointerCapture(ev.pointerId);
    resend = window.setInterval(() => {
      if (lastEvent) sendGesture(lastEvent);
    }, GESTURE_RESEND_MS);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!drag) return;
    lastEvent = ev;
    sendGesture(ev);
  });
  const release = () => {
    if (!drag) return;
    drag = null;
    if (resend !== null) window.clearInterval(resend);
    resend = null;
    session.send(zeroForce());
  };
  canvas.addEventListener("pointerup", release);
  canvas.addEventListener("pointercancel", release);

  // double click sets the goal at the clicked world point
  canvas.addEventListener("dblclick", (ev) => {
    const w = screenToWorld(cam, { x: ev.offsetX, y: ev.offsetY });
    session.send({ type: "goal", goal: { x: w.x, y: w.y } });
  });

  for (const name of ["fc", "gn", "oa"] as const) {
    const box = document.getElementById(`mode-${name}`) as HTMLInputElement;
    box.checked = vm.modes[name];
    box.addEventListener("change", () => {
      vm.modes = { ...vm.modes, [name]: box.checked };
      session.send({ type: "mode", mode: vm.modes });
    });
  }
  (document.getElementById("pause") as HTMLButtonElement).addEventListener(
    "click", () => session.send({ type: "pause" }));
  (document.getElementById("resume") as HTMLButtonElement).addEventListener(
    "click", () => session.send({ type: "resume" }));
  (document.getElementById("reset") as HTMLButtonElement).addEventListener(
    "click", () => session.send({ type: "reset" }));

  const frame = () => {
    if (vm.snapshot) {
      // keep the robot in view
      cam.cx = vm.snapshot.robot.x;
      cam.cy = vm.snapshot.robot.y;
      render(ctx, cam, vm.snapshot);
    }
    window.requestAnimationFrame(frame);
  };
  window.requestAnimationFrame(frame);
}

window.addEventListener("load", main);
