"""Regenerates tests/fixtures/fk_cases.json from the installed armstack package.

Each case mirrors a service state: joint `pos` values as the service
publishes them (after tick quantization and readback) plus the pose the
service computes from the same readings. The panel's client-side FK must
reproduce that pose within a millimeter.

Run from this directory:  python3 gen_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from armstack.description import JointVector, angle_to_ticks, default_description, ticks_to_angle
from armstack.kinematics import forward, gripper_angle_for_width, gripper_width_for_angle
from armstack.service import description_to_dict

OUT = Path(__file__).parent.parent / "tests" / "fixtures" / "fk_cases.json"


def main() -> None:
    d = default_description()
    rng = np.random.default_rng(808)
    cases = []
    for _ in range(100):
        q = JointVector(
            *(rng.uniform(jc.limit_min_rad, jc.limit_max_rad) for jc in d.arm_joints),
            w=rng.uniform(d.gripper.width_closed_m, d.gripper.width_open_m),
        )
        # Quantize through the servo registers exactly like the live loop:
        # command ticks, then read them back.
        readback = []
        for jc, angle in zip(d.arm_joints, q.angles):
            readback.append(ticks_to_angle(angle_to_ticks(angle, jc), jc))
        gjc = d.gripper_joint
        gripper_ticks = angle_to_ticks(gripper_angle_for_width(q.w, d.gripper).value, gjc)
        width = gripper_width_for_angle(ticks_to_angle(gripper_ticks, gjc), d.gripper).value
        q_read = JointVector(*readback, w=width)
        pose = forward(q_read, d)
        cases.append(
            {
                "pos": [*readback, width],
                "pose": {"x": pose.x, "y": pose.y, "z": pose.z, "pitch": pose.pitch},
            }
        )
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(
        json.dumps({"description": description_to_dict(d), "cases": cases}, indent=1)
    )
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
