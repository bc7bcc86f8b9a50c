/**
 * Wire protocol v1 types, command builders, and runtime guards.
 *
 * The service owns the contract (its wire_schema_v1.json); everything the
 * panel sends is built here and the test suite replays recorded sessions
 * against that schema. The panel never clamps values itself: limit
 * enforcement is the service's job and rejections surface in the UI.
 */

export const WIRE_VERSION = 1;

export type Command =
  | { type: "jog"; joint: number; delta_ticks: number }
  | { type: "goto_joints"; q: [number, number, number, number]; w?: number }
  | { type: "goto_pose"; x: number; y: number; z: number; pitch: number; branch?: "elbow_up" | "elbow_down" }
  | { type: "gripper"; width_m: number }
  | { type: "home" }
  | { type: "stop" }
  | { type: "set_speed_scale"; scale: number };

export interface Ack {
  ok: boolean;
  seq?: number;
  code?: string;
  detail?: string;
}

export interface JointState {
  id: number;
  ticks: number;
  pos: number;
  moving: boolean;
}

export type Mode = "idle" | "jog" | "trajectory" | "fault";

export interface RobotState {
  v: number;
  type: "state";
  seq: number;
  t_ms: number;
  mode: Mode;
  joints: JointState[];
  pose: { x: number; y: number; z: number; pitch: number };
  speed_scale: number;
  last_cmd_seq: number;
  fault: string | null;
}

export interface DescriptionInfo {
  name: string;
  geometry: {
    h0: number;
    a2: number;
    a3: number;
    a4: number;
    horizontal_reach: number;
    vertical_reach: number;
  };
  gripper: {
    width_closed_m: number;
    width_open_m: number;
    angle_closed_rad: number;
    angle_open_rad: number;
  };
  joints: Array<{
    name: string;
    motor_id: number;
    limit_min_rad: number;
    limit_max_rad: number;
  }>;
}

export const makeJog = (joint: number, deltaTicks: number): Command => ({
  type: "jog",
  joint,
  delta_ticks: deltaTicks,
});

export const makeGotoPose = (x: number, y: number, z: number, pitch: number): Command => ({
  type: "goto_pose",
  x,
  y,
  z,
  pitch,
});

export const makeGripper = (widthM: number): Command => ({ type: "gripper", width_m: widthM });

export const makeHome = (): Command => ({ type: "home" });

export const makeStop = (): Command => ({ type: "stop" });

const MODES: ReadonlySet<string> = new Set(["idle", "jog", "trajectory", "fault"]);

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

export function parseState(raw: unknown): RobotState | null {
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  if (msg.type !== "state" || msg.v !== WIRE_VERSION) return null;
  if (!isFiniteNumber(msg.seq) || !isFiniteNumber(msg.t_ms) || !isFiniteNumber(msg.last_cmd_seq)) return null;
  if (typeof msg.mode !== "string" || !MODES.has(msg.mode)) return null;
  if (!Array.isArray(msg.joints) || msg.joints.length !== 5) return null;
  for (const joint of msg.joints) {
    const j = joint as Record<string, unknown>;
    if (!isFiniteNumber(j.id) || !isFiniteNumber(j.ticks) || !isFiniteNumber(j.pos) || typeof j.moving !== "boolean") {
      return null;
    }
  }
  const pose = msg.pose as Record<string, unknown> | null;
  if (
    typeof pose !== "object" ||
    pose === null ||
    !isFiniteNumber(pose.x) ||
    !isFiniteNumber(pose.y) ||
    !isFiniteNumber(pose.z) ||
    !isFiniteNumber(pose.pitch)
  ) {
    return null;
  }
  if (!isFiniteNumber(msg.speed_scale)) return null;
  if (msg.fault !== null && typeof msg.fault !== "string") return null;
  return raw as RobotState;
}

export function parseAck(raw: unknown): Ack | null {
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  if (typeof msg.ok !== "boolean") return null;
  return raw as Ack;
}
