"""Motion script files: one command per line, executed by `armstack script`.

Format (blank lines and `#` comments ignored):

    move_joints q1 q2 q3 q4 [w]     # radians, width in meters
    move_line   x y z pitch [step]  # straight tool-space line, meters/radians
    gripper     width_m
    wait        seconds
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .description import JointVector, RobotDescription
from .errors import ArmError
from .kinematics import ToolPose, forward
from .motion import (
    DEFAULT_CARTESIAN_STEP_M,
    Trajectory,
    plan_cartesian_line,
    plan_joint_move,
)


class ScriptError(ValueError):
    """A script file failed to parse; carries the offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_ARG_COUNTS = {
    "move_joints": (4, 5),
    "move_line": (4, 5),
    "gripper": (1, 1),
    "wait": (1, 1),
}


@dataclass(frozen=True)
class ScriptCommand:
    kind: str
    args: tuple[float, ...]
    line_no: int


def parse_script(text: str) -> list[ScriptCommand]:
    commands = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind not in _ARG_COUNTS:
            raise ScriptError(f"unknown command {kind!r}", line_no)
        lo, hi = _ARG_COUNTS[kind]
        if not lo <= len(parts) - 1 <= hi:
            raise ScriptError(f"{kind} takes {lo}..{hi} arguments, got {len(parts) - 1}", line_no)
        try:
            args = tuple(float(p) for p in parts[1:])
        except ValueError:
            raise ScriptError(f"non-numeric argument in {line!r}", line_no) from None
        if not all(math.isfinite(a) for a in args):
            raise ScriptError("arguments must be finite", line_no)
        commands.append(ScriptCommand(kind=kind, args=args, line_no=line_no))
    return commands


def load_script(path) -> list[ScriptCommand]:
    with open(path, encoding="utf-8") as fh:
        return parse_script(fh.read())


@dataclass(frozen=True)
class PlannedStep:
    command: ScriptCommand
    duration: float
    trajectory: Trajectory | None  # None for `wait`


def plan_script(
    commands: list[ScriptCommand],
    d: RobotDescription,
    start: JointVector,
) -> list[PlannedStep]:
    """Plan every command from a starting configuration without executing.

    Motion failures raise the underlying error re-tagged with the script
    line number so callers can point at the file.
    """
    steps = []
    q = start
    for cmd in commands:
        try:
            if cmd.kind == "wait":
                steps.append(PlannedStep(cmd, cmd.args[0], None))
                continue
            traj, q = _plan_one(cmd, d, q)
        except ArmError as exc:
            exc.args = (f"line {cmd.line_no}: {exc.args[0]}",) + exc.args[1:]
            exc.script_line = cmd.line_no
            raise
        steps.append(PlannedStep(cmd, traj.duration, traj))
    return steps


def _plan_one(cmd: ScriptCommand, d: RobotDescription, q: JointVector):
    if cmd.kind == "move_joints":
        target = JointVector(*cmd.args[:4], w=cmd.args[4] if len(cmd.args) == 5 else q.w)
        traj = plan_joint_move(q, target, d)
        return traj, target
    if cmd.kind == "gripper":
        target = replace(q, w=cmd.args[0])
        traj = plan_joint_move(q, target, d)
        return traj, target
    # move_line
    step = cmd.args[4] if len(cmd.args) == 5 else DEFAULT_CARTESIAN_STEP_M
    target_pose = ToolPose(*cmd.args[:4])
    traj = plan_cartesian_line(forward(q, d), target_pose, d, step=step, width=q.w)
    end_q, _ = traj.sample(traj.duration)
    return traj, end_q


def command_target_pose(cmd: ScriptCommand) -> ToolPose | None:
    """The commanded tool pose for move_line commands, None otherwise."""
    if cmd.kind == "move_line":
        return ToolPose(*cmd.args[:4])
    return None
