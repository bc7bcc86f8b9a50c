/**
 * Dual orthographic views of the arm on two canvases.
 *
 * Side view: the pitch plane selected by the base yaw; radius right, height
 * up. Top view: looking down; yaw bearing plus radial extension. Both are
 * lossless for this mechanism, which never rolls the tool.
 */

import { ArmAngles, Geometry, chainPoints } from "./fk.js";
import { RobotState } from "./schema.js";

export interface Viewport {
  width: number;
  height: number;
  /** Pixels per meter. */
  scale: number;
  originX: number;
  originY: number;
}

export function sideViewport(width: number, height: number, geo: Geometry): Viewport {
  const reach = geo.horizontal_reach;
  const top = geo.vertical_reach;
  const margin = 0.9;
  const scale = margin * Math.min(width / (2 * reach * 1.1), height / (top * 1.35));
  return { width, height, scale, originX: width / 2, originY: height * 0.92 };
}

export function topViewport(width: number, height: number, geo: Geometry): Viewport {
  const reach = geo.horizontal_reach;
  const scale = 0.9 * Math.min(width, height) / (2 * reach * 1.05);
  return { width, height, scale, originX: width / 2, originY: height / 2 };
}

/** Side-view world (radius, height) to canvas pixels. */
export function sideToPixels(v: Viewport, r: number, z: number): [number, number] {
  return [v.originX + r * v.scale, v.originY - z * v.scale];
}

/** Top-view world (x, y) to canvas pixels; +x right, +y up the screen. */
export function topToPixels(v: Viewport, x: number, y: number): [number, number] {
  return [v.originX + x * v.scale, v.originY - y * v.scale];
}

export function anglesOf(state: RobotState): ArmAngles {
  const j = state.joints;
  return [j[0]!.pos, j[1]!.pos, j[2]!.pos, j[3]!.pos];
}

const CHAIN_COLORS = ["#888", "#2b6cb0", "#2f855a", "#b7791f"];

export function drawSideView(
  ctx: CanvasRenderingContext2D,
  state: RobotState,
  geo: Geometry,
): void {
  const v = sideViewport(ctx.canvas.width, ctx.canvas.height, geo);
  ctx.clearRect(0, 0, v.width, v.height);
  const points = chainPoints(anglesOf(state), geo).map(([r, z]) => sideToPixels(v, r, z));

  ctx.strokeStyle = "#ccc";
  ctx.lineWidth = 1;
  ctx.beginPath(); // tabletop
  ctx.moveTo(0, v.originY);
  ctx.lineTo(v.width, v.originY);
  ctx.stroke();
  ctx.strokeStyle = "#eee";
  ctx.beginPath(); // reach envelope
  ctx.arc(...sideToPixels(v, 0, geo.h0), geo.horizontal_reach * v.scale, Math.PI, 2 * Math.PI);
  ctx.stroke();

  ctx.lineWidth = 5;
  ctx.lineCap = "round";
  for (let i = 1; i < points.length; i++) {
    ctx.strokeStyle = CHAIN_COLORS[i - 1] ?? "#444";
    ctx.beginPath();
    ctx.moveTo(points[i - 1]![0], points[i - 1]![1]);
    ctx.lineTo(points[i]![0], points[i]![1]);
    ctx.stroke();
  }
  for (const [px, py] of points) {
    ctx.fillStyle = "#1a202c";
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  drawGripper(ctx, points[points.length - 1]!, state);
}

function drawGripper(
  ctx: CanvasRenderingContext2D,
  tip: [number, number],
  state: RobotState,
): void {
  const width = state.joints[4]!.pos;
  const px = Math.max(2, width * 400); // exaggerated so the jaws read at panel size
  ctx.strokeStyle = "#c53030";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(tip[0] - px / 2, tip[1] - 6);
  ctx.lineTo(tip[0] - px / 2, tip[1] + 6);
  ctx.moveTo(tip[0] + px / 2, tip[1] - 6);
  ctx.lineTo(tip[0] + px / 2, tip[1] + 6);
  ctx.stroke();
}

export function drawTopView(
  ctx: CanvasRenderingContext2D,
  state: RobotState,
  geo: Geometry,
): void {
  const v = topViewport(ctx.canvas.width, ctx.canvas.height, geo);
  ctx.clearRect(0, 0, v.width, v.height);
  const center = topToPixels(v, 0, 0);

  ctx.strokeStyle = "#eee";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.arc(center[0], center[1], geo.horizontal_reach * v.scale, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.arc(center[0], center[1], 0.045 * v.scale, 0, 2 * Math.PI); // base cylinder footprint
  ctx.stroke();

  const pose = state.pose;
  const tip = topToPixels(v, pose.x, pose.y);
  ctx.strokeStyle = "#2b6cb0";
  ctx.lineWidth = 4;
  ctx.lineCap = "round";
  ctx.beginPath();
  ctx.moveTo(center[0], center[1]);
  ctx.lineTo(tip[0], tip[1]);
  ctx.stroke();
  ctx.fillStyle = "#c53030";
  ctx.beginPath();
  ctx.arc(tip[0], tip[1], 5, 0, 2 * Math.PI);
  ctx.fill();
}
