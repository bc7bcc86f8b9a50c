"""Exceptions shared across the kinematics, motion, and service layers."""

from __future__ import annotations


class ArmError(Exception):
    """Base class for every armstack-specific error."""


class Unreachable(ArmError):
    """A requested tool pose lies outside the arm's workspace."""

    def __init__(self, message: str, *, margin: float | None = None, sample_index: int | None = None):
        super().__init__(message)
        self.margin = margin
        self.sample_index = sample_index


class LimitViolation(ArmError):
    """A configuration (or every geometric IK branch) exceeds joint limits.

    violations is a list of (joint_index, value, violated_bound) with
    joint_index counted from 1. For IK failures, candidates carries the
    geometrically valid joint vectors that were rejected.
    """

    def __init__(self, violations, candidates=()):
        self.violations = list(violations)
        self.candidates = tuple(candidates)
        detail = "; ".join(
            f"joint {idx}: value {value:.6g} exceeds bound {bound:.6g}"
            for idx, value, bound in self.violations
        )
        super().__init__(f"joint limit violation: {detail}" if detail else "joint limit violation")


class BranchFlip(ArmError):
    """Consecutive samples of a Cartesian path need different elbow branches."""

    def __init__(self, message: str, sample_index: int):
        super().__init__(message)
        self.sample_index = sample_index


class TransportError(ArmError):
    """A serial or simulated transport could not be opened or timed out."""
