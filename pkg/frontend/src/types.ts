// Wire schemas shared with the simulation service (one JSON object per frame).

export interface Vec2 {
  x: number;
  y: number;
}

export interface RobotState {
  x: number;
  y: number;
  theta: number;
  vx: number;
  vy: number;
  wz: number;
}

export interface ObstacleState {
  id: number;
  x: number;
  y: number;
  a: number;
  b: number;
  theta: number;
  pred: Vec2[];
}

export interface SnapshotMessage {
  type: "snapshot";
  t: number;
  robot: RobotState;
  user: Vec2;
  obstacles: ObstacleState[];
  wrench_est: { fx: number; fy: number; mz: number };
  v_tgt: { vx: number; vy: number; wz: number };
  h_min: { robot: number; user: number };
  path: Vec2[];
  status: string;
  paused?: boolean;
}

export interface ForceCommand {
  type: "force";
  force: { fx: number; fy: number; mz: number; hold_ms: number };
}

export interface GoalCommand {
  type: "goal";
  goal: Vec2;
}

export interface ModeCommand {
  type: "mode";
  mode: { fc: boolean; gn: boolean; oa: boolean };
}

export type CommandMessage =
  | ForceCommand
  | GoalCommand
  | ModeCommand
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset" };

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/** Parse one websocket frame; returns null for anything that is not a
 * well-formed snapshot (malformed frames are dropped, the UI stays live). */
export function parseSnapshot(raw: string): SnapshotMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  const msg = data as Partial<SnapshotMessage>;
  if (!msg || msg.type !== "snapshot") return null;
  if (!isFiniteNumber(msg.t)) return null;
  const r = msg.robot;
  if (!r || ![r.x, r.y, r.theta, r.vx, r.vy, r.wz].every(isFiniteNumber)) return null;
  if (!msg.user || !isFiniteNumber(msg.user.x) || !isFiniteNumber(msg.user.y)) return null;
  if (!Array.isArray(msg.obstacles) || !Array.isArray(msg.path)) return null;
  if (!msg.v_tgt || !msg.wrench_est || !msg.h_min) return null;
  return msg as SnapshotMessage;
}
