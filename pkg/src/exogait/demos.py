"""Synthetic flat-ground gait demonstrations.

Stands in for the motion-capture dataset: produces kinematically consistent
step demonstrations (swing-foot path in task space, support-leg angles in
joint space) with per-step variation and sensor-style noise.  Both legs are
straight at the double-support ends of every step, so the endpoints agree
with the flat-ground final-configuration geometry.

The swing-foot trajectory tracks the point of the sole directly below the
ankle: on flat ground it starts and ends at height zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import ExoModel, leg_ik_array
from .learning import Demonstration

__all__ = ["DemoParams", "make_flat_demos"]


@dataclass(frozen=True)
class DemoParams:
    n_steps: int = 6
    samples_per_step: int = 80
    start_x: float = -0.5
    end_x: float = 0.5
    peak_height: float = 0.10
    peak_spread: float = 0.25  # relative step-to-step clearance variation
    span_spread: float = 0.06  # relative step-to-step length variation
    knee_dip: float = 0.015  # CoM drop from knee flexion at mid-stance, meters
    noise_foot: float = 0.003
    noise_angle: float = 0.006


def _hip_progress(s: np.ndarray) -> np.ndarray:
    """Monotone 0->1 ramp, steep at both ends (load transfer happens early/late)."""
    return s + 0.12 * np.sin(2.0 * np.pi * s)


def make_flat_demos(
    model: ExoModel, params: DemoParams = DemoParams(), seed: int = 0
) -> tuple[list[Demonstration], list[Demonstration]]:
    """Generate (foot demonstrations, support-leg demonstrations)."""
    rng = np.random.default_rng(seed)
    foot_demos = []
    supp_demos = []
    half_span = 0.5 * (params.end_x - params.start_x)
    for step in range(params.n_steps):
        s = np.linspace(0.0, 1.0, params.samples_per_step)
        x0 = params.start_x * (1.0 + params.span_spread * rng.uniform(-1, 1))
        x1 = params.end_x * (1.0 + params.span_spread * rng.uniform(-1, 1))
        peak = params.peak_height * (1.0 + params.peak_spread * rng.uniform(-1, 1))
        dip = params.knee_dip * rng.uniform(0.7, 1.3)

        # swing foot and pelvis share one progress ramp; the pelvis rides the
        # midpoint between the feet, which keeps the swing leg reachable at
        # every sample (the lifted foot only shortens the required reach)
        travel = _hip_progress(s)
        foot_x = x0 + (x1 - x0) * travel
        # clearance peaks just past mid-swing, on the 10-point reference grid
        foot_y = peak * np.sin(np.pi * s**1.18) ** 1.5
        foot = np.column_stack([foot_x, foot_y])
        foot += rng.normal(0.0, params.noise_foot, foot.shape)
        foot[0, 1] = max(foot[0, 1], 0.0)
        foot[-1, 1] = max(foot[-1, 1], 0.0)

        hip_x = foot_x / 2.0
        hip_y = model.l3 + np.sqrt(model.reach**2 - hip_x**2) - dip * np.sin(np.pi * s) ** 1.3
        hip = np.column_stack([hip_x, hip_y])

        theta_hip, theta_knee, _ = leg_ik_array(
            model,
            hip,
            np.tile([0.0, model.l3], (len(s), 1)),
            clamp_beyond=1e-6,
        )
        theta_hip = theta_hip + rng.normal(0.0, params.noise_angle, len(s))
        theta_knee = np.minimum(
            theta_knee + rng.normal(0.0, params.noise_angle, len(s)), -1e-5
        )

        foot_demos.append(Demonstration(step, s, foot))
        supp_demos.append(
            Demonstration(step, s, np.column_stack([theta_hip, theta_knee]))
        )
    return foot_demos, supp_demos
