"""Kinematics for the yaw + three-pitch-joint chain.

Task space is four-dimensional: tool position (x, y, z) plus tool pitch.
The three pitch joints move in one vertical plane selected by the base yaw,
so tool roll does not exist and yaw is not independent of position. Pitch 0
points the tool straight up, pi/2 points it at the horizon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .description import GripperConfig, JointVector, RobotDescription
from .errors import LimitViolation, Unreachable

# Radius below which base yaw is geometrically undefined; q1 = 0 there.
YAW_SINGULARITY_RADIUS = 1e-9


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(a, math.tau)
    return math.pi if r <= -math.pi else r


@dataclass(frozen=True)
class ToolPose:
    """Tool-tip position in the base frame plus tool pitch.

    Origin is the base center on the tabletop, z points up. pitch is
    normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    z: float
    pitch: float

    def __post_init__(self):
        object.__setattr__(self, "pitch", normalize_angle(self.pitch))

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.x, self.y, self.z, self.pitch))


class Branch(enum.Enum):
    ELBOW_UP = "elbow_up"      # q3 <= 0
    ELBOW_DOWN = "elbow_down"  # q3 >= 0

    @property
    def other(self) -> "Branch":
        return Branch.ELBOW_DOWN if self is Branch.ELBOW_UP else Branch.ELBOW_UP


@dataclass(frozen=True)
class IkSolution:
    q: JointVector
    branch: Branch | None
    residual: float
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True)
class DlsSettings:
    """Damped-least-squares iteration constants.

    damping caps the effective damping; each step uses
    min(damping, max(residual, damping_floor)), so the iteration is heavily
    damped while far from the target and close to Gauss-Newton near it.
    A fixed damping of 0.05 stalls below 1e-8 residual at elbow-straight
    (near-singular) poses; the residual-tracking schedule does not.
    """

    damping: float = 0.05
    damping_floor: float = 1e-6
    tolerance: float = 1e-8
    max_iterations: int = 200
    step_clamp_rad: float = 0.2


@dataclass(frozen=True)
class EnvelopeSummary:
    max_horizontal_radius: float
    max_tool_height: float
    min_tool_height: float
    n_samples: int


def forward(q: JointVector, d: RobotDescription) -> ToolPose:
    """Joint angles -> tool pose."""
    s2 = math.sin(q.q2)
    s23 = math.sin(q.q2 + q.q3)
    s234 = math.sin(q.q2 + q.q3 + q.q4)
    c2 = math.cos(q.q2)
    c23 = math.cos(q.q2 + q.q3)
    c234 = math.cos(q.q2 + q.q3 + q.q4)
    r = d.a2 * s2 + d.a3 * s23 + d.a4 * s234
    z = d.h0 + d.a2 * c2 + d.a3 * c23 + d.a4 * c234
    return ToolPose(
        x=r * math.cos(q.q1),
        y=r * math.sin(q.q1),
        z=z,
        pitch=q.q2 + q.q3 + q.q4,
    )


def forward_batch(angles: np.ndarray, d: RobotDescription) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized planar FK: (n, 4) joint angles -> (radius, height) arrays."""
    t2 = angles[:, 1]
    t23 = t2 + angles[:, 2]
    t234 = t23 + angles[:, 3]
    r = d.a2 * np.sin(t2) + d.a3 * np.sin(t23) + d.a4 * np.sin(t234)
    z = d.h0 + d.a2 * np.cos(t2) + d.a3 * np.cos(t23) + d.a4 * np.cos(t234)
    return r, z


def jacobian(q: JointVector, d: RobotDescription) -> np.ndarray:
    """Analytic 4x4 Jacobian of forward(): rows (x, y, z, pitch), columns q1..q4."""
    c1 = math.cos(q.q1)
    s1 = math.sin(q.q1)
    t2 = q.q2
    t23 = q.q2 + q.q3
    t234 = t23 + q.q4
    s2, s23, s234 = math.sin(t2), math.sin(t23), math.sin(t234)
    c2, c23, c234 = math.cos(t2), math.cos(t23), math.cos(t234)
    r = d.a2 * s2 + d.a3 * s23 + d.a4 * s234
    # dr/dq_k and dz/dq_k for the pitch joints
    dr = (
        d.a2 * c2 + d.a3 * c23 + d.a4 * c234,
        d.a3 * c23 + d.a4 * c234,
        d.a4 * c234,
    )
    dz = (
        -(d.a2 * s2 + d.a3 * s23 + d.a4 * s234),
        -(d.a3 * s23 + d.a4 * s234),
        -d.a4 * s234,
    )
    J = np.empty((4, 4))
    J[0, 0] = -r * s1
    J[1, 0] = r * c1
    J[2, 0] = 0.0
    J[3, 0] = 0.0
    for k in range(3):
        J[0, k + 1] = c1 * dr[k]
        J[1, k + 1] = s1 * dr[k]
        J[2, k + 1] = dz[k]
        J[3, k + 1] = 1.0
    return J


def pose_error(target: ToolPose, actual: ToolPose) -> np.ndarray:
    """Stacked task-space error (meters, meters, meters, radians)."""
    return np.array(
        [
            target.x - actual.x,
            target.y - actual.y,
            target.z - actual.z,
            normalize_angle(target.pitch - actual.pitch),
        ]
    )


def pose_residual(target: ToolPose, actual: ToolPose) -> float:
    return float(np.linalg.norm(pose_error(target, actual)))


def _arm_limit_violations(angles, d: RobotDescription):
    out = []
    for idx, (value, jc) in enumerate(zip(angles, d.arm_joints), start=1):
        if value < jc.limit_min_rad:
            out.append((idx, value, jc.limit_min_rad))
        elif value > jc.limit_max_rad:
            out.append((idx, value, jc.limit_max_rad))
    return out


def inverse_analytic(
    p: ToolPose, d: RobotDescription, branch: Branch = Branch.ELBOW_UP
) -> IkSolution:
    """Closed-form IK: yaw from atan2, then the planar two-link solution.

    Tries the preferred elbow branch first and falls back to the other; the
    returned solution always satisfies forward() to within 1e-9. Raises
    Unreachable when the wrist point is outside the two-link annulus and
    LimitViolation (carrying both geometric candidates) when no branch fits
    the joint limits.
    """
    if not p.is_finite():
        raise ValueError("pose must be finite")
    radius = math.hypot(p.x, p.y)
    q1 = math.atan2(p.y, p.x) if radius >= YAW_SINGULARITY_RADIUS else 0.0
    rp = radius - d.a4 * math.sin(p.pitch)
    zp = p.z - d.h0 - d.a4 * math.cos(p.pitch)
    c3 = (rp * rp + zp * zp - d.a2 * d.a2 - d.a3 * d.a3) / (2.0 * d.a2 * d.a3)
    if abs(c3) > 1.0 + 1e-12:
        raise Unreachable(
            f"pose ({p.x:.4f}, {p.y:.4f}, {p.z:.4f}, pitch {p.pitch:.4f}) is out of reach",
            margin=abs(c3) - 1.0,
        )
    c3 = min(1.0, max(-1.0, c3))
    q3_mag = math.acos(c3)

    candidates = []
    for br in (branch, branch.other):
        q3 = -q3_mag if br is Branch.ELBOW_UP else q3_mag
        q2 = normalize_angle(
            math.atan2(rp, zp) - math.atan2(d.a3 * math.sin(q3), d.a2 + d.a3 * math.cos(q3))
        )
        q4 = normalize_angle(p.pitch - q2 - q3)
        q = JointVector(q1=q1, q2=q2, q3=q3, q4=q4, w=0.0)
        violations = _arm_limit_violations(q.angles, d)
        if not violations:
            return IkSolution(q=q, branch=br, residual=pose_residual(p, forward(q, d)))
        candidates.append((q, violations))

    raise LimitViolation(candidates[0][1], candidates=tuple(q for q, _ in candidates))


def inverse_numeric(
    p: ToolPose,
    d: RobotDescription,
    q0: JointVector,
    settings: DlsSettings = DlsSettings(),
) -> IkSolution:
    """Damped-least-squares IK from a seed configuration.

    Iterates dq = J^T (J J^T + damping^2 I)^-1 e with the per-step dq
    clamped in max-norm. Always returns the best iterate found; converged
    is False when the tolerance was not met within the iteration budget.
    """
    if not (p.is_finite() and q0.is_finite()):
        raise ValueError("pose and seed must be finite")
    q = np.array(q0.angles, dtype=float)
    best_q = q.copy()
    best_err = math.inf
    iterations = 0
    for it in range(settings.max_iterations + 1):
        qv = q0.with_angles(q)
        e = pose_error(p, forward(qv, d))
        err = float(np.linalg.norm(e))
        if err < best_err:
            best_err = err
            best_q = q.copy()
            iterations = it
        if err < settings.tolerance:
            return IkSolution(q=qv, branch=None, residual=err, converged=True, iterations=it)
        if it == settings.max_iterations:
            break
        lam = min(settings.damping, max(err, settings.damping_floor))
        J = jacobian(qv, d)
        A = J @ J.T + lam * lam * np.eye(4)
        dq = J.T @ np.linalg.solve(A, e)
        step = float(np.max(np.abs(dq)))
        if step > settings.step_clamp_rad:
            dq *= settings.step_clamp_rad / step
        q = q + dq
    return IkSolution(
        q=q0.with_angles(best_q),
        branch=None,
        residual=best_err,
        converged=False,
        iterations=iterations,
    )


class GripperValue(NamedTuple):
    value: float
    clamped: bool


def gripper_angle_for_width(w: float, g: GripperConfig) -> GripperValue:
    """Jaw width -> actuator angle (linear between the calibration points).

    Widths outside the calibrated range are clamped and flagged.
    """
    t = (w - g.width_closed_m) / (g.width_open_m - g.width_closed_m)
    clamped = t < 0.0 or t > 1.0
    t = min(1.0, max(0.0, t))
    return GripperValue(g.angle_closed_rad + t * (g.angle_open_rad - g.angle_closed_rad), clamped)


def gripper_width_for_angle(a: float, g: GripperConfig) -> GripperValue:
    """Actuator angle -> jaw width; exact inverse of gripper_angle_for_width on the valid range."""
    t = (a - g.angle_closed_rad) / (g.angle_open_rad - g.angle_closed_rad)
    clamped = t < 0.0 or t > 1.0
    t = min(1.0, max(0.0, t))
    return GripperValue(g.width_closed_m + t * (g.width_open_m - g.width_closed_m), clamped)


ENVELOPE_SEED = 0x5A57

def workspace_envelope(d: RobotDescription, n_samples: int) -> EnvelopeSummary:
    """Sampled workspace extrema: max horizontal radius, max and min tool height.

    Sampling is uniform over the in-limit joint box with a fixed seed, so
    results are deterministic for a given description and sample count.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    rng = np.random.default_rng(ENVELOPE_SEED)
    lows = np.array([jc.limit_min_rad for jc in d.arm_joints])
    highs = np.array([jc.limit_max_rad for jc in d.arm_joints])
    angles = rng.uniform(lows, highs, size=(n_samples, 4))
    r, z = forward_batch(angles, d)
    return EnvelopeSummary(
        max_horizontal_radius=float(np.max(np.abs(r))),
        max_tool_height=float(np.max(z)),
        min_tool_height=float(np.min(z)),
        n_samples=n_samples,
    )
