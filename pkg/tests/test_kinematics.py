import dataclasses
import math

import numpy as np
import pytest

from armstack.description import JointVector
from armstack.errors import LimitViolation, Unreachable
from armstack.kinematics import (
    Branch,
    DlsSettings,
    ToolPose,
    forward,
    gripper_angle_for_width,
    gripper_width_for_angle,
    inverse_analytic,
    inverse_numeric,
    jacobian,
    normalize_angle,
    pose_residual,
    workspace_envelope,
)
from oracles import finite_difference_jacobian


def random_in_limit(rng, desc, margin=0.0):
    angles = [
        rng.uniform(jc.limit_min_rad + margin, jc.limit_max_rad - margin)
        for jc in desc.arm_joints
    ]
    return JointVector(*angles, w=0.0)


def test_forward_straight_up(desc):
    p = forward(JointVector(), desc)
    assert (p.x, p.y) == (0.0, 0.0)
    assert p.z == pytest.approx(0.40)
    assert p.pitch == 0.0


def test_forward_straight_out(desc):
    p = forward(JointVector(q2=math.pi / 2), desc)
    assert p.x == pytest.approx(0.30)
    assert p.y == pytest.approx(0.0, abs=1e-15)
    assert p.z == pytest.approx(0.10)
    assert p.pitch == pytest.approx(math.pi / 2)


def test_forward_yaw_rotates_reach(desc):
    p = forward(JointVector(q1=math.pi / 2, q2=math.pi / 2), desc)
    assert p.x == pytest.approx(0.0, abs=1e-15)
    assert p.y == pytest.approx(0.30)
    assert p.z == pytest.approx(0.10)


def test_forward_pitch_is_joint_sum_normalized(desc):
    rng = np.random.default_rng(7)
    for _ in range(300):
        q = JointVector(*rng.uniform(-8, 8, size=4), w=0.0)
        p = forward(q, desc)
        assert p.pitch == pytest.approx(normalize_angle(q.q2 + q.q3 + q.q4), abs=1e-12)
        assert -math.pi < p.pitch <= math.pi


def test_forward_never_exceeds_reach(desc):
    rng = np.random.default_rng(8)
    for _ in range(500):
        p = forward(random_in_limit(rng, desc), desc)
        assert math.hypot(p.x, p.y) <= desc.horizontal_reach + 1e-12
        assert p.z <= desc.vertical_reach + 1e-12


def test_jacobian_yaw_column_vanishes_at_vertical(desc):
    J = jacobian(JointVector(), desc)
    assert np.allclose(J[:, 0], 0.0)


def test_jacobian_pitch_row(desc):
    rng = np.random.default_rng(9)
    for _ in range(50):
        J = jacobian(random_in_limit(rng, desc), desc)
        assert np.allclose(J[3], [0.0, 1.0, 1.0, 1.0])


def test_jacobian_matches_finite_differences(desc):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        q = random_in_limit(rng, desc)
        err = np.max(np.abs(jacobian(q, desc) - finite_difference_jacobian(q, desc, step=1e-6)))
        worst = max(worst, float(err))
    assert worst < 1e-5


def test_inverse_analytic_straight_out(desc):
    sol = inverse_analytic(ToolPose(0.30, 0.0, 0.10, math.pi / 2), desc)
    assert sol.branch is Branch.ELBOW_UP
    assert sol.q.q1 == pytest.approx(0.0, abs=1e-12)
    assert sol.q.q2 == pytest.approx(math.pi / 2, abs=1e-9)
    assert sol.q.q3 == pytest.approx(0.0, abs=1e-9)
    assert sol.q.q4 == pytest.approx(0.0, abs=1e-9)
    assert sol.residual < 1e-9


def test_inverse_analytic_beyond_reach(desc):
    with pytest.raises(Unreachable):
        inverse_analytic(ToolPose(0.31, 0.0, 0.10, math.pi / 2), desc)


def test_inverse_analytic_round_trip(desc):
    # Poses are generated by FK from in-limit configurations; near-axis and
    # behind-axis samples (planar radius < 1 cm) are excluded because the
    # yaw half-plane is ambiguous there.
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 1000:
        q = random_in_limit(rng, desc)
        p = forward(q, desc)
        s2 = math.sin(q.q2)
        s23 = math.sin(q.q2 + q.q3)
        s234 = math.sin(q.q2 + q.q3 + q.q4)
        r_signed = desc.a2 * s2 + desc.a3 * s23 + desc.a4 * s234
        if r_signed < 0.01:
            continue
        sol = inverse_analytic(p, desc, branch=Branch.ELBOW_UP)
        assert sol.residual < 1e-9
        assert pose_residual(p, forward(sol.q, desc)) < 1e-9
        # One branch must reproduce the sampled configuration itself.
        best = math.inf
        for branch in (Branch.ELBOW_UP, Branch.ELBOW_DOWN):
            cand = inverse_analytic(p, desc, branch=branch).q
            diff = max(
                abs(math.remainder(cand.q1 - q.q1, math.tau)),
                abs(cand.q2 - q.q2),
                abs(cand.q3 - q.q3),
                abs(cand.q4 - q.q4),
            )
            best = min(best, diff)
        assert best < 1e-9
        checked += 1


def test_inverse_analytic_branch_preference(desc):
    # A pose with distinct elbow solutions: preference decides which comes back.
    p = forward(JointVector(q2=1.0, q3=-0.8, q4=0.5), desc)
    up = inverse_analytic(p, desc, branch=Branch.ELBOW_UP)
    down = inverse_analytic(p, desc, branch=Branch.ELBOW_DOWN)
    assert up.branch is Branch.ELBOW_UP
    assert down.branch is Branch.ELBOW_DOWN
    assert up.q.q3 <= 0.0 <= down.q.q3
    assert up.residual < 1e-9 and down.residual < 1e-9


def test_inverse_analytic_limit_violation_reports_both_branches(desc):
    # Wrist point 3.6 cm from the shoulder needs |q3| beyond the 2.62 rad
    # limit on either branch.
    pose = ToolPose(0.03, 0.0, 0.18, 0.0)
    with pytest.raises(LimitViolation) as excinfo:
        inverse_analytic(pose, desc)
    assert len(excinfo.value.candidates) == 2
    assert excinfo.value.violations


def test_inverse_numeric_fixed_point(desc):
    q0 = JointVector(q2=0.4, q3=-0.9, q4=0.7)
    p = forward(q0, desc)
    sol = inverse_numeric(p, desc, q0)
    assert sol.converged
    assert sol.iterations == 0
    assert sol.residual < 1e-8


def test_inverse_numeric_example_target(desc):
    p = ToolPose(0.24, 0.0, 0.20, math.pi / 2)
    # Confirm reachability independently before asking the iterative solver.
    inverse_analytic(p, desc)
    sol = inverse_numeric(p, desc, JointVector(0.0, 0.5, 0.5, 0.5))
    assert sol.converged
    assert pose_residual(p, forward(sol.q, desc)) < 1e-8


def test_inverse_numeric_beyond_reach_residual_is_boundary_distance(desc):
    target = ToolPose(0.35, 0.0, 0.10, math.pi / 2)
    sol = inverse_numeric(target, desc, JointVector(0.0, 1.0, -0.4, 0.9))
    assert not sol.converged
    envelope = workspace_envelope(desc, 100_000)
    boundary_distance = math.hypot(target.x, target.y) - envelope.max_horizontal_radius
    assert sol.residual == pytest.approx(boundary_distance, abs=1e-3)


def test_gripper_map_endpoints(desc):
    g = desc.gripper
    assert gripper_angle_for_width(g.width_closed_m, g) == (g.angle_closed_rad, False)
    assert gripper_angle_for_width(g.width_open_m, g) == (g.angle_open_rad, False)


def test_gripper_map_midpoint(desc):
    g = desc.gripper
    mid_w = 0.5 * (g.width_closed_m + g.width_open_m)
    mid_a = 0.5 * (g.angle_closed_rad + g.angle_open_rad)
    assert gripper_angle_for_width(mid_w, g).value == pytest.approx(mid_a, abs=1e-15)


def test_gripper_map_round_trip(desc):
    g = desc.gripper
    rng = np.random.default_rng(12)
    for w in rng.uniform(g.width_closed_m, g.width_open_m, size=100):
        angle, clamped = gripper_angle_for_width(float(w), g)
        assert not clamped
        back, clamped_back = gripper_width_for_angle(angle, g)
        assert not clamped_back
        assert back == pytest.approx(w, abs=1e-12)


def test_gripper_map_clamps_and_flags(desc):
    g = desc.gripper
    low = gripper_angle_for_width(g.width_closed_m - 0.01, g)
    high = gripper_angle_for_width(g.width_open_m + 0.01, g)
    assert low == (g.angle_closed_rad, True)
    assert high == (g.angle_open_rad, True)


def test_workspace_envelope_matches_arm_reach(desc):
    env = workspace_envelope(desc, 100_000)
    assert env.max_horizontal_radius == pytest.approx(0.300, abs=1e-3)
    assert env.max_tool_height == pytest.approx(0.400, abs=1e-3)
    assert env.min_tool_height < 0.10


def test_workspace_envelope_scales_with_links(desc):
    doubled = dataclasses.replace(
        desc,
        h0=2 * desc.h0,
        a2=2 * desc.a2,
        a3=2 * desc.a3,
        a4=2 * desc.a4,
        horizontal_reach=2 * desc.horizontal_reach,
    )
    base = workspace_envelope(desc, 20_000)
    big = workspace_envelope(doubled, 20_000)
    assert big.max_horizontal_radius == pytest.approx(2 * base.max_horizontal_radius, rel=1e-12)
    assert big.max_tool_height == pytest.approx(2 * base.max_tool_height, rel=1e-12)


def test_workspace_envelope_rejects_tiny_sample_counts(desc):
    with pytest.raises(ValueError):
        workspace_envelope(desc, 999)


def test_dls_settings_defaults():
    s = DlsSettings()
    assert s.damping == 0.05
    assert s.tolerance == 1e-8
    assert s.max_iterations == 200
    assert s.step_clamp_rad == 0.2


def test_inverse_analytic_yaw_singularity_uses_zero(desc):
    sol = inverse_analytic(ToolPose(0.0, 0.0, 0.40, 0.0), desc)
    assert sol.q.q1 == 0.0
    assert sol.q.angles == (0.0, 0.0, -0.0, 0.0) or all(abs(a) < 1e-12 for a in sol.q.angles)
    assert sol.residual < 1e-12


def test_gripper_maps_are_monotone(desc):
    g = desc.gripper
    widths = np.linspace(g.width_closed_m, g.width_open_m, 50)
    angles = [gripper_angle_for_width(float(w), g).value for w in widths]
    diffs = np.diff(angles)
    assert np.all(diffs > 0) or np.all(diffs < 0)
