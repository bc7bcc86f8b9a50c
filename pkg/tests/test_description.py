import copy
import math

import pytest

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from armstack.description import (
    DescriptionError,
    JointConfig,
    angle_to_ticks,
    default_description,
    default_description_text,
    description_from_dict,
    parse_description,
    ticks_to_angle,
)


@pytest.fixture()
def default_doc():
    return tomllib.loads(default_description_text())


def test_default_description_geometry(desc):
    assert desc.h0 == pytest.approx(0.10)
    assert desc.a2 == pytest.approx(0.12)
    assert desc.a3 == pytest.approx(0.12)
    assert desc.a4 == pytest.approx(0.06)
    # The headline workspace figures follow from the link sums.
    assert abs((desc.a2 + desc.a3 + desc.a4) - desc.horizontal_reach) < 1e-12
    assert desc.horizontal_reach == pytest.approx(0.30)
    assert desc.vertical_reach == pytest.approx(0.40)


def test_default_description_bus_and_joints(desc):
    assert desc.bus.baud == 57600
    assert desc.bus.loop_hz == 50.0
    assert [jc.motor_id for jc in desc.joints] == [1, 2, 3, 4, 5]
    assert all(jc.ticks_per_rev == 4096 for jc in desc.joints)
    assert all(jc.limit_min_rad < jc.limit_max_rad for jc in desc.joints)


def test_load_is_deterministic():
    assert default_description() == default_description()


def test_key_order_is_irrelevant():
    reordered = """
name = "desk-arm"
schema_version = 1

[gripper]
angle_open_rad = 1.2
angle_closed_rad = 0.0
width_open_m = 0.08
width_closed_m = 0.0

[geometry]
horizontal_reach = 0.30
a4 = 0.06
a3 = 0.12
a2 = 0.12
h0 = 0.10

[bus]
loop_hz = 50.0
baud = 57600
"""
    joints = default_description_text().split("[[joint]]", 1)[1]
    reordered += "[[joint]]" + joints.split("[metadata]")[0]
    assert parse_description(reordered) == default_description()


def test_parse_error_reports_line():
    with pytest.raises(DescriptionError, match="parse error"):
        parse_description("schema_version = = 1")


@pytest.mark.parametrize(
    "mutate,message",
    [
        (lambda doc: doc["geometry"].__setitem__("a2", 0.0), "non-positive link length"),
        (lambda doc: doc["geometry"].__setitem__("h0", -0.1), "non-positive link length"),
        (lambda doc: doc["geometry"].__setitem__("horizontal_reach", 0.31), "horizontal_reach mismatch"),
        (lambda doc: doc["joint"][2].__setitem__("motor_id", 1), "duplicate motor id"),
        (lambda doc: doc["joint"][0].__setitem__("motor_id", 0), "motor id out of range"),
        (lambda doc: doc["joint"][4].__setitem__("motor_id", 254), "motor id out of range"),
        (lambda doc: doc["joint"].pop(), "exactly 5 joints"),
        (lambda doc: doc["joint"][1].__setitem__("ticks_per_rev", 0), "ticks_per_rev"),
        (lambda doc: doc["joint"][1].__setitem__("center_ticks", 4096), "center_ticks out of range"),
        (lambda doc: doc["joint"][1].__setitem__("center_ticks", -1), "center_ticks out of range"),
        (lambda doc: doc["joint"][3].__setitem__("sign", 2), "sign must be"),
        (lambda doc: doc["joint"][3].__setitem__("limit_min_rad", 2.0), "limit_min_rad must be below"),
        (lambda doc: doc["joint"][0].__setitem__("vmax_rad_s", 0.0), "vmax_rad_s must be positive"),
        (lambda doc: doc["joint"][0].__setitem__("amax_rad_s2", -1.0), "amax_rad_s2 must be positive"),
        (lambda doc: doc["gripper"].__setitem__("width_open_m", 0.0), "width_open_m must exceed"),
        (lambda doc: doc["gripper"].__setitem__("width_closed_m", -0.01), "width_closed_m must be >= 0"),
        (lambda doc: doc["gripper"].__setitem__("angle_open_rad", 0.0), "calibration angles must differ"),
        (lambda doc: doc["bus"].__setitem__("baud", 0), "baud must be positive"),
        (lambda doc: doc["bus"].__setitem__("loop_hz", 0.0), "loop_hz must be positive"),
        (lambda doc: doc.__setitem__("schema_version", 2), "unsupported schema_version"),
        (lambda doc: doc["geometry"].pop("a3"), "missing key: geometry.a3"),
    ],
)
def test_every_invariant_is_enforced(default_doc, mutate, message):
    doc = copy.deepcopy(default_doc)
    mutate(doc)
    with pytest.raises(DescriptionError, match=message):
        description_from_dict(doc)


def test_ticks_to_angle_center_is_zero():
    jc = JointConfig(motor_id=1)
    assert ticks_to_angle(2048, jc) == 0.0


def test_ticks_to_angle_quarter_rev():
    jc = JointConfig(motor_id=1)
    assert ticks_to_angle(3072, jc) == pytest.approx(math.pi / 2, abs=1e-15)


def test_ticks_to_angle_sign_flip():
    jc = JointConfig(motor_id=1, sign=-1)
    assert ticks_to_angle(1024, jc) == pytest.approx(math.pi / 2, abs=1e-15)


def test_angle_to_ticks_inverts_center_and_quarter():
    jc = JointConfig(motor_id=1)
    assert angle_to_ticks(0.0, jc) == 2048
    assert angle_to_ticks(math.pi / 2, jc) == 3072


@pytest.mark.parametrize(
    "jc",
    [
        JointConfig(motor_id=1),
        JointConfig(motor_id=2, sign=-1),
        JointConfig(motor_id=3, ticks_per_rev=4095, center_ticks=17),
        JointConfig(motor_id=4, ticks_per_rev=1024, center_ticks=1023, sign=-1),
    ],
)
def test_tick_round_trip_is_exact_over_full_range(jc):
    for t in range(jc.ticks_per_rev):
        assert angle_to_ticks(ticks_to_angle(t, jc), jc) == t


def test_out_of_range_ticks_map_linearly():
    jc = JointConfig(motor_id=1)
    assert ticks_to_angle(2048 + 4096, jc) == pytest.approx(math.tau)
    assert angle_to_ticks(math.tau, jc) == 2048 + 4096
