"""Planar sagittal kinematics of the two-leg exoskeleton chain.

Conventions (shared by every module downstream):

* Base frame ``{O}`` sits at the base of the support foot, x forward, y up.
* With the support foot flat on the ground, its ankle is at ``(0, L3)``.
* Hip flexion is positive forward.  The knee angle is 0 at full extension
  and negative in flexion, so the over-extension limit is simply
  ``theta_knee <= 0``.
* The ankle is rigid at 90 deg to the shin while the foot is in the air;
  ground compliance is handled by the planner, not here.

All functions are pure; array variants (suffix ``_array``) operate on
whole trajectories at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange, Unreachable

__all__ = [
    "ExoModel",
    "LegAngles",
    "PlanarPose",
    "com_from_support",
    "foot_from_com",
    "leg_ik",
    "foot_contact_points",
    "com_from_support_array",
    "ankle_from_hip_array",
    "leg_ik_array",
    "foot_contact_array",
]


@dataclass(frozen=True)
class ExoModel:
    """Segment lengths, joint limits and step limits of one exoskeleton fit.

    Lengths in meters: thigh ``l1``, shin ``l2``, foot height ``l3``,
    heel-to-ankle ``l4``, ankle-to-toes ``l5``.
    """

    l1: float = 0.46
    l2: float = 0.40
    l3: float = 0.09
    l4: float = 0.08
    l5: float = 0.20
    hip_range: tuple[float, float] = (-0.9, 1.5)
    knee_range: tuple[float, float] = (-2.1, 0.0)
    max_step_length: float = 0.8
    max_step_height: float = 0.35

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "l4", "l5"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.hip_range[0] >= self.hip_range[1]:
            raise ValueError("hip_range must be increasing")
        if self.knee_range[0] >= self.knee_range[1]:
            raise ValueError("knee_range must be increasing")
        if self.knee_range[1] > 1e-12:
            raise ValueError("knee_range upper bound must be <= 0")
        if not self.max_step_length < 2.0 * (self.l1 + self.l2):
            raise ValueError("max_step_length must be < 2*(l1+l2)")
        if self.max_step_height <= 0:
            raise ValueError("max_step_height must be positive")

    @property
    def leg_length(self) -> float:
        """Straight-stand hip height: l1 + l2 + l3."""
        return self.l1 + self.l2 + self.l3

    @property
    def reach(self) -> float:
        """Hip-to-ankle reach with the knee fully extended."""
        return self.l1 + self.l2

    @property
    def foot_length(self) -> float:
        return self.l4 + self.l5


@dataclass(frozen=True)
class LegAngles:
    """Hip/knee angles of one leg; the ankle rests at 90 deg off the ground."""

    theta_hip: float
    theta_knee: float
    theta_ankle: float = math.pi / 2

    def __post_init__(self):
        if not (math.isfinite(self.theta_hip) and math.isfinite(self.theta_knee)):
            raise ValueError("angles must be finite")

    def within(self, model: ExoModel, tol: float = 1e-9) -> bool:
        return (
            model.hip_range[0] - tol <= self.theta_hip <= model.hip_range[1] + tol
            and model.knee_range[0] - tol <= self.theta_knee <= model.knee_range[1] + tol
        )


@dataclass(frozen=True)
class PlanarPose:
    """A point in the sagittal base frame (x forward, y up), meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("pose must be finite")

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @classmethod
    def from_array(cls, a) -> "PlanarPose":
        return cls(float(a[0]), float(a[1]))


def _down(theta):
    """Unit vector along a segment hanging at angle ``theta`` from vertical."""
    return np.stack([np.sin(theta), -np.cos(theta)], axis=-1)


def _forward(theta):
    """Unit vector along the foot sole for shin angle ``theta``."""
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _hip_to_ankle(model: ExoModel, theta_hip, theta_knee):
    return model.l1 * _down(theta_hip) + model.l2 * _down(theta_hip + theta_knee)


def com_from_support(model: ExoModel, support: LegAngles) -> PlanarPose:
    """Hip (CoM) position from the support-leg angles, foot flat at the origin."""
    ankle = np.array([0.0, model.l3])
    hip = ankle - _hip_to_ankle(model, support.theta_hip, support.theta_knee)
    return PlanarPose.from_array(hip)


def com_from_support_array(model: ExoModel, theta_hip, theta_knee) -> np.ndarray:
    th = np.asarray(theta_hip, float)
    tk = np.asarray(theta_knee, float)
    ankle = np.array([0.0, model.l3])
    return ankle - _hip_to_ankle(model, th, tk)


def foot_from_com(model: ExoModel, com: PlanarPose, swing: LegAngles) -> PlanarPose:
    """Swing-leg ankle position from the hip (CoM) and the swing-leg angles."""
    ankle = com.to_array() + _hip_to_ankle(model, swing.theta_hip, swing.theta_knee)
    return PlanarPose.from_array(ankle)


def ankle_from_hip_array(model: ExoModel, hip_xy, theta_hip, theta_knee) -> np.ndarray:
    return np.asarray(hip_xy, float) + _hip_to_ankle(
        model, np.asarray(theta_hip, float), np.asarray(theta_knee, float)
    )


def leg_ik(
    model: ExoModel,
    hip: PlanarPose,
    target_ankle: PlanarPose,
    clamp_beyond: float = 1e-9,
    check_range: bool = True,
) -> LegAngles:
    """Unique flexion-branch (knee <= 0) solution placing the ankle at the target.

    Targets up to ``clamp_beyond`` meters past full extension are clamped to
    the straight-leg solution; farther targets raise :class:`Unreachable`.
    """
    th, tk, clamped = leg_ik_array(
        model,
        hip.to_array()[None, :],
        target_ankle.to_array()[None, :],
        clamp_beyond=clamp_beyond,
    )
    angles = LegAngles(float(th[0]), float(tk[0]))
    if check_range and not angles.within(model):
        raise OutOfRange(
            f"IK solution hip={angles.theta_hip:.4f}, knee={angles.theta_knee:.4f} "
            f"violates joint ranges"
        )
    return angles


def leg_ik_array(model: ExoModel, hip_xy, ankle_xy, clamp_beyond: float = 1e-9):
    """Vectorized IK.  Returns ``(theta_hip, theta_knee, clamped_mask)``."""
    hip_xy = np.atleast_2d(np.asarray(hip_xy, float))
    ankle_xy = np.atleast_2d(np.asarray(ankle_xy, float))
    d = ankle_xy - hip_xy
    r = np.hypot(d[:, 0], d[:, 1])
    over = r - model.reach
    if np.any(over > clamp_beyond):
        worst = float(np.max(over))
        raise Unreachable(
            f"target {worst:.6g} m beyond full leg extension ({model.reach:.3f} m)"
        )
    clamped = over > 0
    cos_k = (r**2 - model.l1**2 - model.l2**2) / (2.0 * model.l1 * model.l2)
    cos_k = np.clip(cos_k, -1.0, 1.0)
    tk = -np.arccos(cos_k)
    tk[clamped] = 0.0
    # angle of the hip->ankle vector from straight down, then subtract the
    # in-triangle offset of the composite two-segment link
    base = np.arctan2(d[:, 0], -d[:, 1])
    offset = np.arctan2(model.l2 * np.sin(tk), model.l1 + model.l2 * np.cos(tk))
    th = base - offset
    return th, tk, clamped


def foot_contact_points(
    model: ExoModel, ankle: PlanarPose, shin_angle: float
) -> tuple[PlanarPose, PlanarPose]:
    """Heel and toes positions for a foot rigid at 90 deg to the shin."""
    heel, toes = foot_contact_array(
        model, ankle.to_array()[None, :], np.array([shin_angle])
    )
    return PlanarPose.from_array(heel[0]), PlanarPose.from_array(toes[0])


def foot_contact_array(model: ExoModel, ankle_xy, shin_angle, foot_pitch=None):
    """Vectorized heel/toes.  ``foot_pitch`` overrides the sole orientation
    (defaults to the shin angle, i.e. the rigid 90 deg ankle)."""
    ankle_xy = np.atleast_2d(np.asarray(ankle_xy, float))
    shin = np.asarray(shin_angle, float)
    pitch = shin if foot_pitch is None else np.asarray(foot_pitch, float)
    sole = ankle_xy + model.l3 * _down(pitch)
    fwd = _forward(pitch)
    heel = sole - model.l4 * fwd
    toes = sole + model.l5 * fwd
    return heel, toes
