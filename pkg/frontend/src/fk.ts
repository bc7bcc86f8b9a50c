/**
 * Client-side kinematics for rendering.
 *
 * The arm is planar after the base yaw: three pitch joints move the tool in
 * one vertical plane. Pose fields mirror the service: x/y/z in meters from
 * the base center on the tabletop, pitch 0 pointing up, pi/2 horizontal.
 * Duplicated client-side (instead of fetched) so rendering never stalls on
 * the network; a test pins it against service-reported poses.
 */

export interface Geometry {
  h0: number;
  a2: number;
  a3: number;
  a4: number;
  horizontal_reach: number;
  vertical_reach: number;
}

export interface ToolPose {
  x: number;
  y: number;
  z: number;
  pitch: number;
}

export type ArmAngles = readonly [number, number, number, number];

export function normalizeAngle(a: number): number {
  let r = a % (2 * Math.PI);
  if (r <= -Math.PI) r += 2 * Math.PI;
  if (r > Math.PI) r -= 2 * Math.PI;
  return r;
}

/** Planar chain points (radius, height) from base plate to tool tip. */
export function chainPoints(q: ArmAngles, geo: Geometry): Array<[number, number]> {
  const [, q2, q3, q4] = q;
  const t2 = q2;
  const t23 = q2 + q3;
  const t234 = q2 + q3 + q4;
  const shoulder: [number, number] = [0, geo.h0];
  const elbow: [number, number] = [
    geo.a2 * Math.sin(t2),
    geo.h0 + geo.a2 * Math.cos(t2),
  ];
  const wrist: [number, number] = [
    elbow[0] + geo.a3 * Math.sin(t23),
    elbow[1] + geo.a3 * Math.cos(t23),
  ];
  const tip: [number, number] = [
    wrist[0] + geo.a4 * Math.sin(t234),
    wrist[1] + geo.a4 * Math.cos(t234),
  ];
  return [[0, 0], shoulder, elbow, wrist, tip];
}

export function forwardKinematics(q: ArmAngles, geo: Geometry): ToolPose {
  const [q1] = q;
  const points = chainPoints(q, geo);
  const tip = points[points.length - 1]!;
  const r = tip[0];
  return {
    x: r * Math.cos(q1),
    y: r * Math.sin(q1),
    z: tip[1],
    pitch: normalizeAngle(q[1] + q[2] + q[3]),
  };
}

export function poseDistance(a: ToolPose, b: ToolPose): number {
  return Math.hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}
