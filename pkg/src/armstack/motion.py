"""Trajectory generation: trapezoidal joint profiles and Cartesian lines.

Plans operate on five axes: the four arm joints plus the gripper actuator
angle (jaw width is converted through the calibration map). All joints in a
segment are time-scaled to the slowest one so they start and stop together;
velocity and acceleration stay within each joint's configured bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .description import JointVector, RobotDescription
from .errors import BranchFlip, LimitViolation, Unreachable
from .kinematics import (
    Branch,
    ToolPose,
    gripper_angle_for_width,
    gripper_width_for_angle,
    inverse_analytic,
    normalize_angle,
)

DEFAULT_CARTESIAN_STEP_M = 0.005

_ZERO_DISTANCE = 1e-15


@dataclass(frozen=True)
class LimitReport:
    """Joint-limit check result: (joint index, value, violated bound) triples.

    Joint indices run 1..4 for the arm; index 5 reports the jaw width
    against the gripper's calibrated range.
    """

    entries: tuple[tuple[int, float, float], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.entries


def check_limits(q: JointVector, d: RobotDescription) -> LimitReport:
    entries = []
    for idx, (value, jc) in enumerate(zip(q.angles, d.arm_joints), start=1):
        if value < jc.limit_min_rad:
            entries.append((idx, value, jc.limit_min_rad))
        elif value > jc.limit_max_rad:
            entries.append((idx, value, jc.limit_max_rad))
    g = d.gripper
    if q.w < g.width_closed_m:
        entries.append((5, q.w, g.width_closed_m))
    elif q.w > g.width_open_m:
        entries.append((5, q.w, g.width_open_m))
    return LimitReport(tuple(entries))


@dataclass(frozen=True)
class AxisProfile:
    """Symmetric trapezoid (or triangle) for one axis.

    v_peak is signed; t_cruise may be zero. A zero v_peak means the axis
    holds its start value for the whole segment.
    """

    start: float
    end: float
    t_acc: float
    t_cruise: float
    v_peak: float

    @property
    def duration(self) -> float:
        return 2.0 * self.t_acc + self.t_cruise

    def evaluate(self, t: float) -> tuple[float, float]:
        """Position and velocity at time t (clamped to the profile span)."""
        if self.v_peak == 0.0:
            return self.start, 0.0
        T = self.duration
        if t <= 0.0:
            return self.start, 0.0
        if t >= T:
            return self.end, 0.0
        accel = self.v_peak / self.t_acc
        if t < self.t_acc:
            return self.start + 0.5 * accel * t * t, accel * t
        if t < self.t_acc + self.t_cruise:
            return (
                self.start + 0.5 * self.v_peak * self.t_acc + self.v_peak * (t - self.t_acc),
                self.v_peak,
            )
        tau = T - t
        return self.end - 0.5 * accel * tau * tau, accel * tau


@dataclass(frozen=True)
class Segment:
    duration: float
    axes: tuple[AxisProfile, ...]


@dataclass(frozen=True)
class Trajectory:
    """Piecewise joint-space path; immutable and safe to share.

    Axis order is (q1, q2, q3, q4, gripper actuator angle). Sampling
    converts the actuator angle back to jaw width for the JointVector.
    """

    segments: tuple[Segment, ...]
    start_axes: tuple[float, float, float, float, float]
    description: RobotDescription

    @property
    def duration(self) -> float:
        return sum(seg.duration for seg in self.segments)

    def sample(self, time: float) -> tuple[JointVector, tuple[float, float, float, float, float]]:
        """Evaluate the path at `time` (clamped to [0, duration]).

        Returns the configuration and the five axis velocities in rad/s.
        """
        remaining = max(0.0, time)
        axes = self.start_axes
        velocities = (0.0, 0.0, 0.0, 0.0, 0.0)
        for seg in self.segments:
            if remaining < seg.duration:
                values = tuple(p.evaluate(remaining) for p in seg.axes)
                axes = tuple(v[0] for v in values)
                velocities = tuple(v[1] for v in values)
                break
            remaining -= seg.duration
            axes = tuple(p.end for p in seg.axes)
            velocities = (0.0, 0.0, 0.0, 0.0, 0.0)
        width = gripper_width_for_angle(axes[4], self.description.gripper).value
        q = JointVector(axes[0], axes[1], axes[2], axes[3], w=width)
        return q, velocities


def sample(trajectory: Trajectory, time: float):
    return trajectory.sample(time)


def _axes_of(q: JointVector, d: RobotDescription) -> tuple[float, ...]:
    return (*q.angles, gripper_angle_for_width(q.w, d.gripper).value)


def _axis_bounds(d: RobotDescription) -> tuple[tuple[float, float], ...]:
    return tuple((jc.vmax_rad_s, jc.amax_rad_s2) for jc in d.joints)


def _min_duration(distance: float, vmax: float, amax: float) -> float:
    if distance <= _ZERO_DISTANCE:
        return 0.0
    if distance >= vmax * vmax / amax:
        return distance / vmax + vmax / amax
    return 2.0 * math.sqrt(distance / amax)


def _profile_for_duration(start: float, end: float, vmax: float, amax: float, T: float) -> AxisProfile:
    distance = abs(end - start)
    if distance <= _ZERO_DISTANCE:
        return AxisProfile(start, end, 0.0, T, 0.0)
    # Smaller root of v^2 - T*amax*v + distance*amax = 0: full-amax ramps
    # with the cruise speed lowered until the move takes exactly T.
    disc = max(0.0, (T * amax) ** 2 - 4.0 * distance * amax)
    v = min(vmax, 0.5 * (T * amax - math.sqrt(disc)))
    t_acc = v / amax
    t_cruise = max(0.0, distance / v - t_acc)
    sign = 1.0 if end >= start else -1.0
    return AxisProfile(start, end, t_acc, t_cruise, sign * v)


def _segment(axes_from, axes_to, bounds) -> Segment | None:
    T = max(
        _min_duration(abs(b - a), vmax, amax)
        for (a, b), (vmax, amax) in zip(zip(axes_from, axes_to), bounds)
    )
    if T == 0.0:
        return None
    profiles = tuple(
        _profile_for_duration(a, b, vmax, amax, T)
        for (a, b), (vmax, amax) in zip(zip(axes_from, axes_to), bounds)
    )
    return Segment(duration=max(p.duration for p in profiles), axes=profiles)


def plan_joint_move(q_from: JointVector, q_to: JointVector, d: RobotDescription) -> Trajectory:
    """Synchronized trapezoidal move between two in-limit configurations."""
    for q in (q_from, q_to):
        report = check_limits(q, d)
        if not report.ok:
            raise LimitViolation(report.entries)
    axes_from = _axes_of(q_from, d)
    axes_to = _axes_of(q_to, d)
    seg = _segment(axes_from, axes_to, _axis_bounds(d))
    segments = () if seg is None else (seg,)
    return Trajectory(segments=segments, start_axes=axes_from, description=d)


def line_poses(p_from: ToolPose, p_to: ToolPose, step: float) -> list[ToolPose]:
    """Waypoint poses along a straight (x, y, z) line with a linear pitch blend.

    Includes both endpoints; interior samples sit every `step` meters. A
    degenerate line (same position and pitch) yields just the start pose.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    distance = math.dist((p_from.x, p_from.y, p_from.z), (p_to.x, p_to.y, p_to.z))
    pitch_span = normalize_angle(p_to.pitch - p_from.pitch)
    n_samples = max(1, math.ceil(distance / step))
    if distance <= _ZERO_DISTANCE and abs(pitch_span) <= _ZERO_DISTANCE:
        n_samples = 0
    poses = []
    for i in range(n_samples + 1):
        frac = i / n_samples if n_samples else 0.0
        poses.append(
            ToolPose(
                x=p_from.x + frac * (p_to.x - p_from.x),
                y=p_from.y + frac * (p_to.y - p_from.y),
                z=p_from.z + frac * (p_to.z - p_from.z),
                pitch=p_from.pitch + frac * pitch_span,
            )
        )
    return poses


def plan_cartesian_line(
    p_from: ToolPose,
    p_to: ToolPose,
    d: RobotDescription,
    step: float = DEFAULT_CARTESIAN_STEP_M,
    branch: Branch = Branch.ELBOW_UP,
    width: float = 0.0,
) -> Trajectory:
    """Straight line in (x, y, z) with a linear pitch blend.

    The line is sampled every `step` meters, each sample is solved with the
    analytic IK on a consistent elbow branch, and the samples are joined by
    retimed joint-space segments. The jaw width is held at `width`.
    """
    configs = []
    chosen_branch: Branch | None = None
    for i, pose in enumerate(line_poses(p_from, p_to, step)):
        try:
            sol = inverse_analytic(pose, d, branch=chosen_branch or branch)
        except Unreachable as exc:
            raise Unreachable(
                f"line sample {i} at ({pose.x:.4f}, {pose.y:.4f}, {pose.z:.4f}) is out of reach",
                sample_index=i,
            ) from exc
        except LimitViolation as exc:
            exc.args = (f"line sample {i}: {exc.args[0]}",)
            raise
        if chosen_branch is None:
            chosen_branch = sol.branch
        elif sol.branch is not chosen_branch:
            raise BranchFlip(
                f"line sample {i} requires branch {sol.branch.value}, previous samples used {chosen_branch.value}",
                sample_index=i,
            )
        configs.append(JointVector(*sol.q.angles, w=width))

    # IK bounds the angles already; the held width still needs a check.
    report = check_limits(configs[0], d)
    if not report.ok:
        raise LimitViolation(report.entries)
    bounds = _axis_bounds(d)
    segments = []
    axes_prev = _axes_of(configs[0], d)
    start_axes = axes_prev
    for q in configs[1:]:
        axes_next = _axes_of(q, d)
        seg = _segment(axes_prev, axes_next, bounds)
        if seg is not None:
            segments.append(seg)
        axes_prev = axes_next
    return Trajectory(segments=tuple(segments), start_axes=start_axes, description=d)
