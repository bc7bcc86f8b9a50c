"""armstack: control software for a five-servo desktop robot arm.

Subpackages and modules:

- description: robot geometry, calibration, tick/angle conversions
- kinematics: forward/inverse kinematics, Jacobian, workspace envelope
- protocol: servo bus frame codec, CRC, incremental framer
- simulator: byte-accurate virtual servo bus
- transport: byte transports (virtual bus, posix serial)
- motion: joint-space and Cartesian trajectory planning
- scripting: motion script file parsing
- service: fixed-rate control loop plus WebSocket/HTTP teleop API
- cli: the `armstack` command
"""

__version__ = "0.1.0"
