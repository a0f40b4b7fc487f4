// Canvas scene drawing. Works against the subset of CanvasRenderingContext2D
// it needs, so tests can drive it with a recording stub.

import { SnapshotMessage, Vec2 } from "./types.js";
import { Camera, worldToScreen } from "./viewmodel.js";

export interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  ellipse(
    x: number, y: number, rx: number, ry: number,
    rot: number, a0: number, a1: number,
  ): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

const ROBOT_RADIUS_M = 0.45;
const USER_RADIUS_M = 0.25;

function drawArrow(ctx: Ctx2D, from: Vec2, to: Vec2, color: string): void {
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.moveTo(from.x, from.y);
  ctx.lineTo(to.x, to.y);
  ctx.stroke();
  const ang = Math.atan2(to.y - from.y, to.x - from.x);
  ctx.beginPath();
  ctx.moveTo(to.x, to.y);
  ctx.lineTo(to.x - 8 * Math.cos(ang - 0.4), to.y - 8 * Math.sin(ang - 0.4));
  ctx.moveTo(to.x, to.y);
  ctx.lineTo(to.x - 8 * Math.cos(ang + 0.4), to.y - 8 * Math.sin(ang + 0.4));
  ctx.stroke();
}

export function render(ctx: Ctx2D, cam: Camera, snap: SnapshotMessage): void {
  ctx.clearRect(0, 0, cam.width, cam.height);
  const px = (m: number) => m * cam.scale;

  // planned path
  if (snap.path.length > 1) {
    ctx.strokeStyle = "#888";
    ctx.lineWidth = 1;
    ctx.beginPath();
    const first = worldToScreen(cam, snap.path[0]);
    ctx.moveTo(first.x, first.y);
    for (const p of snap.path.slice(1)) {
      const s = worldToScreen(cam, p);
      ctx.lineTo(s.x, s.y);
    }
    ctx.stroke();
  }

  // obstacles with predicted trails
  for (const ob of snap.obstacles) {
    const c = worldToScreen(cam, ob);
    ctx.strokeStyle = "#c0392b";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.ellipse(c.x, c.y, px(ob.a), px(ob.b), -ob.theta, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.strokeStyle = "#e8a6a0";
    ctx.lineWidth = 1;
    for (const p of ob.pred) {
      const s = worldToScreen(cam, p);
      ctx.beginPath();
      ctx.arc(s.x, s.y, 2, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }

  // robot footprint and heading
  const r = worldToScreen(cam, snap.robot);
  ctx.strokeStyle = "#2c3e50";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(r.x, r.y, px(ROBOT_RADIUS_M), 0, 2 * Math.PI);
  ctx.stroke();
  const nose = worldToScreen(cam, {
    x: snap.robot.x + ROBOT_RADIUS_M * Math.cos(snap.robot.theta),
    y: snap.robot.y + ROBOT_RADIUS_M * Math.sin(snap.robot.theta),
  });
  ctx.beginPath();
  ctx.moveTo(r.x, r.y);
  ctx.lineTo(nose.x, nose.y);
  ctx.stroke();

  // user disc on the rod
  const u = worldToScreen(cam, snap.user);
  ctx.strokeStyle = "#8e44ad";
  ctx.beginPath();
  ctx.arc(u.x, u.y, px(USER_RADIUS_M), 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(r.x, r.y);
  ctx.lineTo(u.x, u.y);
  ctx.stroke();

  // two velocity arrows: compliance target (green) and command (blue)
  const theta = snap.robot.theta;
  const rot = (vx: number, vy: number) => ({
    x: Math.cos(theta) * vx - Math.sin(theta) * vy,
    y: Math.sin(theta) * vx + Math.cos(theta) * vy,
  });
  const vt = rot(snap.v_tgt.vx, snap.v_tgt.vy);
  const vc = rot(snap.robot.vx, snap.robot.vy);
  drawArrow(ctx, r, { x: r.x + px(vt.x), y: r.y - px(vt.y) }, "#27ae60");
  drawArrow(ctx, r, { x: r.x + px(vc.x), y: r.y - px(vc.y) }, "#2980b9");

  // barrier margin gauges turn red inside the margin
  ctx.font = "14px monospace";
  ctx.fillStyle = snap.h_min.robot < 0 ? "#c0392b" : "#2c3e50";
  ctx.fillText(`h robot ${fmt(snap.h_min.robot)}`, 10, 20);
  ctx.fillStyle = snap.h_min.user < 0 ? "#c0392b" : "#2c3e50";
  ctx.fillText(`h user  ${fmt(snap.h_min.user)}`, 10, 38);
  ctx.fillStyle = "#2c3e50";
  ctx.fillText(`t ${snap.t.toFixed(1)}s  ${snap.status}`, 10, 56);
}

function fmt(v: number): string {
  return v > 1e8 ? "inf" : v.toFixed(2);
}
