// Cockpit state: latest snapshot, connection status, camera transform, and
// the drag-to-force gesture mapping. The view model never invents simulation
// state; it only reflects the most recent snapshot.

import { CommandMessage, ForceCommand, SnapshotMessage, Vec2 } from "./types.js";

export const FORCE_SATURATION_N = 80;
export const TORQUE_SATURATION_NM = 20;
export const GESTURE_HOLD_MS = 250;

export type ConnectionState = "connecting" | "open" | "closed";

export interface Camera {
  scale: number; // pixels per meter
  cx: number; // world point at the canvas center
  cy: number;
  width: number;
  height: number;
}

export function worldToScreen(cam: Camera, p: Vec2): Vec2 {
  return {
    x: cam.width / 2 + (p.x - cam.cx) * cam.scale,
    y: cam.height / 2 - (p.y - cam.cy) * cam.scale,
  };
}

export function screenToWorld(cam: Camera, p: Vec2): Vec2 {
  return {
    x: cam.cx + (p.x - cam.width / 2) / cam.scale,
    y: cam.cy - (p.y - cam.height / 2) / cam.scale,
  };
}

export interface ForceGesture {
  dxPx: number; // drag displacement in screen pixels
  dyPx: number;
  torque: boolean; // modifier drag twists instead of pushing sideways
}

/** Map a drag displacement to a force command in the robot body frame.
 * Screen-up is world-forward when the camera tracks the robot heading; here
 * the drag is interpreted in the world frame and rotated by the robot
 * heading, saturating at the calibrated force/torque limits. */
export function forceFromGesture(
  g: ForceGesture,
  robotTheta: number,
  newtonsPerPixel: number,
): ForceCommand {
  const fxWorld = g.dxPx * newtonsPerPixel;
  const fyWorld = -g.dyPx * newtonsPerPixel; // screen y grows downward
  const c = Math.cos(robotTheta);
  const s = Math.sin(robotTheta);
  let fx = c * fxWorld + s * fyWorld;
  let fy = -s * fxWorld + c * fyWorld;
  let mz = 0;
  if (g.torque) {
    mz = clamp(fyWorld * 0.25, -TORQUE_SATURATION_NM, TORQUE_SATURATION_NM);
    fx = 0;
    fy = 0;
  } else {
    const mag = Math.hypot(fx, fy);
    if (mag > FORCE_SATURATION_N) {
      fx *= FORCE_SATURATION_N / mag;
      fy *= FORCE_SATURATION_N / mag;
    }
  }
  return { type: "force", force: { fx, fy, mz, hold_ms: GESTURE_HOLD_MS } };
}

export function zeroForce(): ForceCommand {
  return { type: "force", force: { fx: 0, fy: 0, mz: 0, hold_ms: 0 } };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

export class ViewModel {
  snapshot: SnapshotMessage | null = null;
  connection: ConnectionState = "connecting";
  modes = { fc: true, gn: true, oa: true };
  dropped = 0;

  /** Accept a snapshot only if it is not older than the one on screen. */
  ingest(snap: SnapshotMessage): boolean {
    if (this.snapshot && snap.t < this.snapshot.t) {
      this.dropped += 1;
      return false;
    }
    this.snapshot = snap;
    return true;
  }

  toggleMode(name: "fc" | "gn" | "oa"): CommandMessage {
    this.modes = { ...this.modes, [name]: !this.modes[name] };
    return { type: "mode", mode: this.modes };
  }
}
