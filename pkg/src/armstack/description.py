"""Robot description: geometry, joint calibration, motor mapping, unit conversions.

The description is loaded once from a TOML document and is immutable
afterwards; every other layer (kinematics, planner, simulator, service)
treats it as shared read-only data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1

# Servos on the bus are addressed 1..253; 254 is broadcast.
MIN_MOTOR_ID = 1
MAX_MOTOR_ID = 253


class DescriptionError(ValueError):
    """A robot description failed to parse or validate."""


@dataclass(frozen=True)
class JointConfig:
    """Calibration and motion bounds for one servo-driven joint."""

    motor_id: int
    ticks_per_rev: int = 4096
    center_ticks: int = 2048
    sign: int = 1
    limit_min_rad: float = -math.pi
    limit_max_rad: float = math.pi
    vmax_rad_s: float = 1.5
    amax_rad_s2: float = 4.0
    name: str = ""


@dataclass(frozen=True)
class GripperConfig:
    """Two-point calibration of the jaw-width <-> actuator-angle map."""

    width_closed_m: float
    width_open_m: float
    angle_closed_rad: float
    angle_open_rad: float


@dataclass(frozen=True)
class BusConfig:
    baud: int = 57600
    loop_hz: float = 50.0


@dataclass(frozen=True)
class JointVector:
    """Configuration-space state: four arm joint angles plus jaw width.

    q1 is base yaw; q2, q3, q4 are the pitch joints sharing one vertical
    plane; w is the gripper jaw separation in meters.
    """

    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0
    q4: float = 0.0
    w: float = 0.0

    @property
    def angles(self) -> tuple[float, float, float, float]:
        return (self.q1, self.q2, self.q3, self.q4)

    def with_angles(self, angles) -> "JointVector":
        q1, q2, q3, q4 = angles
        return replace(self, q1=q1, q2=q2, q3=q3, q4=q4)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.q1, self.q2, self.q3, self.q4, self.w))


@dataclass(frozen=True)
class RobotDescription:
    """The arm's geometry and bus layout as data.

    Lengths are meters: h0 is the shoulder height above the table, a2/a3/a4
    the link lengths from shoulder to tool tip. joints holds exactly five
    entries: base yaw, shoulder, elbow, wrist, then the gripper actuator.
    """

    h0: float
    a2: float
    a3: float
    a4: float
    horizontal_reach: float
    joints: tuple[JointConfig, ...]
    gripper: GripperConfig
    bus: BusConfig
    name: str = "desk-arm"

    @property
    def arm_joints(self) -> tuple[JointConfig, ...]:
        return self.joints[:4]

    @property
    def gripper_joint(self) -> JointConfig:
        return self.joints[4]

    @property
    def vertical_reach(self) -> float:
        return self.h0 + self.a2 + self.a3 + self.a4

    def validate(self) -> None:
        """Check every structural invariant; raise DescriptionError on the first violation."""
        for field_name in ("h0", "a2", "a3", "a4"):
            if getattr(self, field_name) <= 0.0:
                raise DescriptionError(f"non-positive link length: {field_name}")
        if abs((self.a2 + self.a3 + self.a4) - self.horizontal_reach) > 1e-12:
            raise DescriptionError(
                "horizontal_reach mismatch: a2+a3+a4 = "
                f"{self.a2 + self.a3 + self.a4!r} but declared {self.horizontal_reach!r}"
            )
        if len(self.joints) != 5:
            raise DescriptionError(f"exactly 5 joints required, got {len(self.joints)}")
        seen_ids: set[int] = set()
        for idx, jc in enumerate(self.joints, start=1):
            label = jc.name or f"joint {idx}"
            if not MIN_MOTOR_ID <= jc.motor_id <= MAX_MOTOR_ID:
                raise DescriptionError(f"motor id out of range for {label}: {jc.motor_id}")
            if jc.motor_id in seen_ids:
                raise DescriptionError(f"duplicate motor id: {jc.motor_id}")
            seen_ids.add(jc.motor_id)
            if jc.ticks_per_rev <= 0:
                raise DescriptionError(f"ticks_per_rev must be positive for {label}")
            if not 0 <= jc.center_ticks < jc.ticks_per_rev:
                raise DescriptionError(f"center_ticks out of range for {label}: {jc.center_ticks}")
            if jc.sign not in (1, -1):
                raise DescriptionError(f"sign must be +1 or -1 for {label}")
            if not jc.limit_min_rad < jc.limit_max_rad:
                raise DescriptionError(f"limit_min_rad must be below limit_max_rad for {label}")
            if jc.vmax_rad_s <= 0.0:
                raise DescriptionError(f"vmax_rad_s must be positive for {label}")
            if jc.amax_rad_s2 <= 0.0:
                raise DescriptionError(f"amax_rad_s2 must be positive for {label}")
        g = self.gripper
        if g.width_closed_m < 0.0:
            raise DescriptionError("width_closed_m must be >= 0")
        if not g.width_open_m > g.width_closed_m:
            raise DescriptionError("width_open_m must exceed width_closed_m")
        if g.angle_open_rad == g.angle_closed_rad:
            raise DescriptionError("gripper calibration angles must differ")
        if self.bus.baud <= 0:
            raise DescriptionError("baud must be positive")
        if self.bus.loop_hz <= 0.0:
            raise DescriptionError("loop_hz must be positive")


def ticks_to_angle(ticks: int, jc: JointConfig) -> float:
    """Servo position register value -> joint angle in radians.

    The map is linear and total: out-of-range ticks are converted the same
    way, the caller decides whether that matters.
    """
    return jc.sign * (ticks - jc.center_ticks) * math.tau / jc.ticks_per_rev


def angle_to_ticks(angle: float, jc: JointConfig) -> int:
    """Joint angle in radians -> nearest servo position register value.

    Exact inverse of ticks_to_angle up to rounding; halves round away from
    zero so the map stays symmetric around the center tick.
    """
    raw = jc.center_ticks + jc.sign * angle * jc.ticks_per_rev / math.tau
    return _round_half_away_from_zero(raw)


def _round_half_away_from_zero(x: float) -> int:
    if x >= 0.0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


def parse_description(text: str) -> RobotDescription:
    """Parse and validate a robot description document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise DescriptionError(f"parse error: {exc}") from exc
    return description_from_dict(doc)


def load_description(path: str | Path) -> RobotDescription:
    """Load and validate a robot description file."""
    return parse_description(Path(path).read_text(encoding="utf-8"))


def description_from_dict(doc: dict) -> RobotDescription:
    """Build a validated RobotDescription from parsed document data."""
    version = _require(doc, "schema_version", int)
    if version != SCHEMA_VERSION:
        raise DescriptionError(f"unsupported schema_version: {version}")
    geometry = _require(doc, "geometry", dict)
    joints_doc = _require(doc, "joint", list)
    joints = tuple(_joint_from_dict(j, i) for i, j in enumerate(joints_doc, start=1))
    gripper_doc = _require(doc, "gripper", dict)
    gripper = GripperConfig(
        width_closed_m=_require(gripper_doc, "width_closed_m", float, "gripper."),
        width_open_m=_require(gripper_doc, "width_open_m", float, "gripper."),
        angle_closed_rad=_require(gripper_doc, "angle_closed_rad", float, "gripper."),
        angle_open_rad=_require(gripper_doc, "angle_open_rad", float, "gripper."),
    )
    bus_doc = doc.get("bus", {})
    bus = BusConfig(
        baud=int(bus_doc.get("baud", BusConfig.baud)),
        loop_hz=float(bus_doc.get("loop_hz", BusConfig.loop_hz)),
    )
    desc = RobotDescription(
        h0=_require(geometry, "h0", float, "geometry."),
        a2=_require(geometry, "a2", float, "geometry."),
        a3=_require(geometry, "a3", float, "geometry."),
        a4=_require(geometry, "a4", float, "geometry."),
        horizontal_reach=_require(geometry, "horizontal_reach", float, "geometry."),
        joints=joints,
        gripper=gripper,
        bus=bus,
        name=str(doc.get("name", "desk-arm")),
    )
    desc.validate()
    return desc


def _joint_from_dict(j: dict, index: int) -> JointConfig:
    if not isinstance(j, dict):
        raise DescriptionError(f"joint {index} must be a table")
    prefix = f"joint[{index}]."
    return JointConfig(
        motor_id=_require(j, "motor_id", int, prefix),
        ticks_per_rev=int(j.get("ticks_per_rev", JointConfig.ticks_per_rev)),
        center_ticks=int(j.get("center_ticks", JointConfig.center_ticks)),
        sign=int(j.get("sign", JointConfig.sign)),
        limit_min_rad=float(_require(j, "limit_min_rad", float, prefix)),
        limit_max_rad=float(_require(j, "limit_max_rad", float, prefix)),
        vmax_rad_s=float(j.get("vmax_rad_s", JointConfig.vmax_rad_s)),
        amax_rad_s2=float(j.get("amax_rad_s2", JointConfig.amax_rad_s2)),
        name=str(j.get("name", f"joint{index}")),
    )


def _require(doc: dict, key: str, kind: type, prefix: str = ""):
    if key not in doc:
        raise DescriptionError(f"missing key: {prefix}{key}")
    value = doc[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise DescriptionError(f"wrong type for {prefix}{key}: expected {kind.__name__}")
    return value


def default_description_text() -> str:
    """The TOML text of the description shipped with the package."""
    return resources.files("armstack.data").joinpath("default.toml").read_text(encoding="utf-8")


def default_description() -> RobotDescription:
    """The shipped default arm: 30 cm horizontal and 40 cm vertical reach."""
    return parse_description(default_description_text())
