"""Per-step gait planning pipeline.

For one step: pick the terrain-specific final configuration, pin the step
endpoints and peak with tight via-points, build per-phase inequality
constraints (joint boxes, ground profile, obstacle keep-out), solve the
constrained kernel model in two local frames (start and goal), fuse, and
convert the swing-foot path to joint angles.

The support leg is solved first because the obstacle keep-out region
depends on the pelvis trajectory.

The swing-foot trajectory tracks the sole point directly below the ankle,
so its height is zero whenever the foot rests on flat ground at the origin
level; the ankle used for IK sits ``l3`` above it.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .environment import ObstacleBox, Terrain, TerrainReport
from .errors import (
    InvalidBounds,
    ObstacleTooLarge,
    OutOfRange,
    PlanInfeasible,
    Unreachable,
    UnreachableConfiguration,
)
from .kinematics import (
    ExoModel,
    LegAngles,
    PlanarPose,
    com_from_support,
    com_from_support_array,
    foot_contact_array,
    foot_from_com,
    leg_ik,
    leg_ik_array,
)
from .kmp import (
    KmpModel,
    LocalFrame,
    TrajectoryDistribution,
    ViaPoint,
    fuse_local_trajectories,
    project_database,
    project_via,
    set_step_height_via,
    update_via_points,
)
from .lckmp import (
    ConstraintSet,
    PhaseConstraint,
    assemble_constraints,
    predict_constrained,
    solve_dual_qp,
)
from .learning import ReferenceDatabase

__all__ = [
    "StepKind",
    "StepRequest",
    "FinalConfiguration",
    "PlanReport",
    "GaitPlan",
    "final_configuration",
    "boundary_constraints",
    "obstacle_constraints",
    "step_ground_profile",
    "plan_step",
    "steady_start",
    "standing_start",
    "chain_state",
    "kind_from_terrain",
    "max_descend_step",
]

GROUND_MARGIN = 0.005  # interior tightening; constraints bind at phases only
KNEE_VIA_CAP = -1e-4  # final knee via stays a hair in flexion
SLACK_GATE = -1e-6
PENETRATION_GATE = 1e-3
ENDPOINT_GATE = 1e-3
KNEE_GATE = 1e-6
IK_CLAMP = 5e-3  # swing IK tolerance past full extension, meters


class StepKind(enum.Enum):
    FLAT = "flat"
    SLOPE_UP = "slope_up"
    SLOPE_DOWN = "slope_down"
    STAIRS_UP = "stairs_up"
    STAIRS_DOWN = "stairs_down"
    STAIRS_UP_CLOSE = "stairs_up_close"
    STAIRS_DOWN_CLOSE = "stairs_down_close"

    @property
    def is_stairs(self) -> bool:
        return self in (
            StepKind.STAIRS_UP,
            StepKind.STAIRS_DOWN,
            StepKind.STAIRS_UP_CLOSE,
            StepKind.STAIRS_DOWN_CLOSE,
        )

    @property
    def is_closing(self) -> bool:
        return self in (StepKind.STAIRS_UP_CLOSE, StepKind.STAIRS_DOWN_CLOSE)


def kind_from_terrain(terrain: Terrain, closing: bool = False) -> StepKind:
    table = {
        Terrain.FLAT: StepKind.FLAT,
        Terrain.SLOPE_UP: StepKind.SLOPE_UP,
        Terrain.SLOPE_DOWN: StepKind.SLOPE_DOWN,
        Terrain.STAIRS_UP: StepKind.STAIRS_UP_CLOSE if closing else StepKind.STAIRS_UP,
        Terrain.STAIRS_DOWN: StepKind.STAIRS_DOWN_CLOSE if closing else StepKind.STAIRS_DOWN,
    }
    return table[terrain]


@dataclass(frozen=True)
class StepRequest:
    """Everything needed to plan one step from the current stance."""

    kind: StepKind
    exo: ExoModel
    support_angles: LegAngles
    swing_angles: LegAngles
    step_length: float
    step_height: float
    report: TerrainReport | None = None
    edge_x: float | None = None
    obstacles: tuple[ObstacleBox, ...] | None = None
    duration: float = 2.0
    n_out: int = 100
    support_side: str = "left"

    def __post_init__(self):
        if self.step_length > self.exo.max_step_length + 1e-9:
            raise InvalidBounds(
                f"step length {self.step_length:.3f} exceeds limit "
                f"{self.exo.max_step_length:.3f}"
            )
        if self.step_height > self.exo.max_step_height + 1e-9:
            raise InvalidBounds(
                f"step height {self.step_height:.3f} exceeds limit "
                f"{self.exo.max_step_height:.3f}"
            )
        if self.n_out < 2:
            raise ValueError("n_out must be at least 2")
        if self.obstacles is not None:
            object.__setattr__(self, "obstacles", tuple(self.obstacles))


@dataclass(frozen=True)
class FinalConfiguration:
    com_final: PlanarPose
    support_final: LegAngles
    foot_final: PlanarPose


def max_descend_step(model: ExoModel, drop: float) -> float:
    """Longest stair-descent step whose rear leg can stay on its flat foot.

    The pelvis ends above the lower foothold, ``drop`` below the straight
    stand, while the rear ankle stays put; beyond this length the rear leg
    would have to leave the ground.
    """
    if drop <= 0:
        return model.max_step_length
    reach = model.reach
    if drop >= 2 * reach:
        return 0.0
    return math.sqrt(drop * (2.0 * reach - drop))


def final_configuration(
    kind: StepKind, model: ExoModel, foothold: PlanarPose
) -> FinalConfiguration:
    """Terrain-specific end-of-step pelvis target and support angles.

    Flat, first stair-ascent and slope-ascent steps put the pelvis midway
    between the feet with the support leg straight.  Slope descent keeps
    the midpoint rule but straightens the swing leg instead.  Stair descent
    and the feet-together closing steps put the pelvis directly above the
    foothold with the landing leg straight.
    """
    xf, yf = foothold.x, foothold.y
    reach = model.reach
    if kind in (StepKind.FLAT, StepKind.STAIRS_UP, StepKind.SLOPE_UP):
        half = xf / 2.0
        if abs(half) > reach:
            raise UnreachableConfiguration("foothold too far for a straight support leg")
        com = PlanarPose(half, model.l3 + math.sqrt(reach**2 - half**2))
    elif kind is StepKind.SLOPE_DOWN:
        half = xf / 2.0
        if abs(half) > reach:
            raise UnreachableConfiguration("foothold too far for a straight swing leg")
        com = PlanarPose(half, yf + model.l3 + math.sqrt(reach**2 - half**2))
    else:  # stair descent and both closing steps: pelvis above the new foothold
        com = PlanarPose(xf, yf + model.leg_length)
    try:
        support = leg_ik(model, com, PlanarPose(0.0, model.l3))
    except Unreachable as exc:
        raise UnreachableConfiguration(
            f"final configuration for {kind.value} is out of reach: {exc}"
        ) from exc
    return FinalConfiguration(com, support, foothold)


def step_ground_profile(kind: StepKind, start: PlanarPose, goal: PlanarPose, edge_x):
    """Ground height along the step implied by its endpoints and kind.

    Slopes are the line through the support-foot base at the origin with
    the endpoint gradient (the endpoints themselves sit a contact offset
    above it); stairs are a riser step at ``edge_x``; otherwise level.
    """
    y0, yf = start.y, goal.y
    if kind in (StepKind.SLOPE_UP, StepKind.SLOPE_DOWN):
        if abs(goal.x - start.x) < 1e-9:
            level = min(y0, yf)
            return lambda x: level + np.zeros_like(np.asarray(x, float))
        slope = (yf - y0) / (goal.x - start.x)
        return lambda x: slope * np.asarray(x, float)
    if kind.is_stairs and edge_x is not None:
        lo, hi = (y0, yf)

        def stairs(x):
            x = np.asarray(x, float)
            return np.where(x < edge_x, lo, hi)

        return stairs
    level = min(y0, yf)
    return lambda x: level + np.zeros_like(np.asarray(x, float))


def boundary_constraints(
    kind: StepKind,
    model: ExoModel,
    db_supp: ReferenceDatabase,
    db_foot: ReferenceDatabase,
    support_start: LegAngles,
    support_final: LegAngles,
    foot_start: PlanarPose,
    foot_goal: PlanarPose,
    edge_x: float | None = None,
    margin: float = GROUND_MARGIN,
) -> tuple[list[PhaseConstraint], list[PhaseConstraint]]:
    """Per-phase joint and task boxes.

    Support leg: the hip stays between its initial and final values (the
    learned trend is monotone) and the knee never extends past zero.
    Swing foot: x stays between the endpoints, height below the mechanical
    limit and above a terrain-dependent floor (level, ramp through the
    support foot, or a riser step function); interior phases get a safety
    margin because constraints bind at the reference phases only.
    """
    hip_lo = min(support_start.theta_hip, support_final.theta_hip)
    hip_hi = max(support_start.theta_hip, support_final.theta_hip)
    supp = []
    for n in range(db_supp.n):
        supp.append(PhaseConstraint(n, (1.0, 0.0), hip_lo))
        supp.append(PhaseConstraint(n, (-1.0, 0.0), -hip_hi))
        supp.append(PhaseConstraint(n, (0.0, -1.0), 0.0))  # knee <= 0

    x0, xf = foot_start.x, foot_goal.x
    y0, yf = foot_start.y, foot_goal.y
    if x0 > xf + 1e-9:
        raise InvalidBounds(
            f"swing start x {x0:.3f} lies ahead of the goal x {xf:.3f}"
        )
    x_lo, x_hi = min(x0, xf), max(x0, xf)

    if kind in (StepKind.SLOPE_UP, StepKind.SLOPE_DOWN) and abs(xf - x0) > 1e-9:
        slope = (yf - y0) / (xf - x0)
        floor = slope * db_foot.mu[:, 0]
    elif kind.is_stairs and edge_x is not None:
        edge_index = int(np.argmin(np.abs(db_foot.mu[:, 0] - edge_x)))
        floor = np.where(np.arange(db_foot.n) < edge_index, y0, yf)
    else:
        floor = np.full(db_foot.n, min(y0, yf))

    swing = []
    last = db_foot.n - 1
    for n in range(db_foot.n):
        interior = 0 < n < last
        swing.append(PhaseConstraint(n, (1.0, 0.0), x_lo))
        swing.append(PhaseConstraint(n, (-1.0, 0.0), -x_hi))
        swing.append(PhaseConstraint(n, (0.0, -1.0), -model.max_step_height))
        swing.append(
            PhaseConstraint(n, (0.0, 1.0), float(floor[n]) + (margin if interior else 0.0))
        )
    return supp, swing


def _upper_hull(points: np.ndarray) -> np.ndarray:
    """Upper convex hull of 2-D points, returned left to right."""
    pts = points[np.lexsort((points[:, 1], points[:, 0]))]
    hull: list[np.ndarray] = []
    for p in pts:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if cross >= 0:  # b lies under segment a-p
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def _composite_contact_positions(
    model: ExoModel, com_xy: np.ndarray, surface: np.ndarray, tip_offset: float
):
    """Foot sole positions placing a foot tip on each obstacle surface point.

    ``tip_offset`` is +l5 for the toes and -l4 for the heel.  The shin,
    foot height and tip form one rigid link, so each (pelvis, surface
    point) pair is a two-link IK problem; unreachable or implausible
    contacts are dropped.
    """
    l_eff = math.hypot(model.l2 + model.l3, tip_offset)
    delta = math.atan2(tip_offset, model.l2 + model.l3)
    d = surface[None, :, :] - com_xy[:, None, :]  # (C, S, 2)
    r = np.hypot(d[..., 0], d[..., 1])
    reach = model.l1 + l_eff
    cos_k = (r**2 - model.l1**2 - l_eff**2) / (2.0 * model.l1 * l_eff)
    feasible = (r <= reach) & (np.abs(cos_k) <= 1.0)
    if not feasible.any():
        return np.zeros((0, 2))
    ang2 = -np.arccos(np.clip(cos_k, -1.0, 1.0))
    base = np.arctan2(d[..., 0], -d[..., 1])
    offset = np.arctan2(l_eff * np.sin(ang2), model.l1 + l_eff * np.cos(ang2))
    theta_hip = base - offset
    phi = theta_hip + ang2 - delta  # shin angle
    theta_knee = phi - theta_hip
    plausible = (
        feasible
        & (theta_knee <= 1e-9)
        & (theta_knee >= model.knee_range[0])
        & (theta_hip >= model.hip_range[0])
        & (theta_hip <= model.hip_range[1])
        & (np.abs(phi) <= 1.2)
    )
    if not plausible.any():
        return np.zeros((0, 2))
    com_grid = np.broadcast_to(com_xy[:, None, :], d.shape)[plausible]
    th = theta_hip[plausible]
    ph = phi[plausible]
    ankle = com_grid + np.stack(
        [
            model.l1 * np.sin(th) + model.l2 * np.sin(ph),
            -model.l1 * np.cos(th) - model.l2 * np.cos(ph),
        ],
        axis=-1,
    )
    return ankle - np.array([0.0, model.l3])


def obstacle_constraints(
    box: ObstacleBox,
    base_y: float,
    com_traj: np.ndarray,
    model: ExoModel,
    db_foot: ReferenceDatabase,
    m_surface: int = 64,
    margin: float = GROUND_MARGIN,
    ground=None,
) -> tuple[list[PhaseConstraint], np.ndarray]:
    """Keep-out constraints around an enlarged obstacle box.

    The obstacle surface is discretized; for every pelvis sample the foot
    poses whose toes or heel would touch a surface point are collected.
    Together with the inflated box corners they define a tent (rising to a
    single apex, then falling) the foot trajectory must stay above; the
    tent corners o1/apex/o3 also key forward-progression windows on x.
    Returns the constraints and the three corner points.
    """
    if box.length < 1e-9 or box.height < 1e-9:
        return [], np.zeros((0, 2))
    top = base_y + box.height
    ground = ground if ground is not None else (lambda x: np.full_like(np.asarray(x, float), base_y))

    n_top = max(int(round(m_surface * box.length / (box.length + 2 * box.height))), 2)
    n_face = max((m_surface - n_top) // 2, 2)
    surface = np.vstack(
        [
            np.column_stack([np.full(n_face, box.x_start), np.linspace(base_y, top, n_face)]),
            np.column_stack([np.linspace(box.x_start, box.x_end, n_top), np.full(n_top, top)]),
            np.column_stack([np.full(n_face, box.x_end), np.linspace(base_y, top, n_face)]),
        ]
    )
    com_xy = np.asarray(com_traj, float).reshape(-1, 2)

    risk = [
        _composite_contact_positions(model, com_xy, surface, model.l5),
        _composite_contact_positions(model, com_xy, surface, -model.l4),
    ]
    corners = np.array(
        [
            [box.x_start, top],
            [box.x_end, top],
            [box.x_start, base_y],
            [box.x_end, base_y],
        ]
    )
    risk.append(corners)
    pts = np.vstack([r for r in risk if len(r)])
    # keep only contact poses above the local ground; inflate by the margin
    pts = pts[pts[:, 1] >= np.asarray(ground(pts[:, 0])) - 0.02]
    pts = pts + np.array([0.0, margin])
    x1 = float(np.min(pts[:, 0])) - margin
    x3 = float(np.max(pts[:, 0])) + margin
    g1 = float(np.asarray(ground(np.array([x1])))[0])
    g3 = float(np.asarray(ground(np.array([x3])))[0])
    hull_pts = np.vstack([pts, [[x1, g1], [x3, g3]]])
    hull = _upper_hull(hull_pts)
    apex = hull[int(np.argmax(hull[:, 1]))]
    if apex[1] > model.max_step_height + 1e-9:
        raise ObstacleTooLarge(
            f"clearing the obstacle needs foot height {apex[1]:.3f} m "
            f"above the limit {model.max_step_height:.3f} m"
        )

    mu_x = db_foot.mu[:, 0]
    o_x = np.array([x1, float(apex[0]), x3])
    n_o = [int(np.argmin(np.abs(mu_x - x))) for x in o_x]
    cons: list[PhaseConstraint] = []
    for n in range(db_foot.n):
        xr = mu_x[n]
        if x1 < xr < x3:
            bound = float(np.interp(xr, hull[:, 0], hull[:, 1]))
            cons.append(PhaseConstraint(n, (0.0, 1.0), bound))
    # forward-progression windows keyed by the tent corners
    bounds_fwd = [(n_o[0], n_o[1], x1), (n_o[1], n_o[2], float(apex[0])), (n_o[2], db_foot.n, x3)]
    for lo, hi, bound in bounds_fwd:
        for n in range(lo, hi):
            cons.append(PhaseConstraint(n, (1.0, 0.0), bound))
    bounds_back = [(n_o[0], float(apex[0])), (n_o[1], x3)]
    for hi_idx, bound in bounds_back:
        for n in range(0, hi_idx + 1):
            cons.append(PhaseConstraint(n, (-1.0, 0.0), -bound))
    return cons, np.array([[x1, g1], [float(apex[0]), float(apex[1])], [x3, g3]])


def _dedupe(cons: list[PhaseConstraint]) -> list[PhaseConstraint]:
    """Keep only the tightest bound per (phase, direction)."""
    best: dict[tuple, PhaseConstraint] = {}
    for c in cons:
        key = (c.index, round(float(c.direction[0]), 9), round(float(c.direction[1]), 9))
        if key not in best or c.bound > best[key].bound:
            best[key] = c
    return list(best.values())


def _current_bounds(cons: list[PhaseConstraint]) -> dict[tuple, float]:
    bounds: dict[tuple, float] = {}
    for c in cons:
        key = (c.index, round(float(c.direction[0]), 9), round(float(c.direction[1]), 9))
        bounds[key] = max(bounds.get(key, -math.inf), c.bound)
    return bounds


def _interphase_violations(
    traj,
    profile,
    x_lo: float,
    x_hi: float,
    phases: np.ndarray,
    last_index: int,
    current: dict[tuple, float],
) -> list[PhaseConstraint]:
    """Tighter per-phase bounds wherever the dense curve escapes its box.

    Constraints bind at the reference phases only, so the smooth curve can
    dip below the ground floor or slip outside the x window in between.
    Bounds at the neighbouring interior phases are raised cumulatively by
    the observed excursion until the dense curve complies.
    """
    means = traj.means
    dense = traj.phases
    floor = np.asarray(profile(means[:, 0]))
    fixes: list[PhaseConstraint] = []

    def neighbours(s: float) -> list[int]:
        right = int(np.searchsorted(phases, s))
        out = []
        for idx in (right - 1, right):
            if 0 < idx < last_index:
                out.append(idx)
        return out

    def raise_bound(n: int, direction: tuple, default: float, excess: float):
        key = (n, round(direction[0], 9), round(direction[1], 9))
        base = current.get(key, default)
        fixes.append(PhaseConstraint(n, direction, base + excess + 0.002))

    dip = floor - means[:, 1]
    for i in np.flatnonzero(dip > 2e-4):
        for n in neighbours(float(dense[i])):
            raise_bound(n, (0.0, 1.0), float(floor[i]), float(dip[i]))
    behind = x_lo - means[:, 0]
    for i in np.flatnonzero(behind > 2e-4):
        for n in neighbours(float(dense[i])):
            raise_bound(n, (1.0, 0.0), x_lo, float(behind[i]))
    ahead = means[:, 0] - x_hi
    for i in np.flatnonzero(ahead > 2e-4):
        for n in neighbours(float(dense[i])):
            raise_bound(n, (-1.0, 0.0), -x_hi, float(ahead[i]))
    return fixes


@dataclass(frozen=True)
class PlanReport:
    """Post-solve verification summary; the plan is only emitted if it passes."""

    n_constraints: int
    boundary_slack_min: float
    endpoint_error_start: float
    endpoint_error_goal: float
    peak_error: float | None
    ground_penetration_max: float
    obstacle_clearances: tuple[float, ...]
    knee_max: float
    hip_monotonicity_defect: float
    qp_iterations: int
    kkt_residual_max: float
    solve_time: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class GaitPlan:
    """One planned step: task-space foot path, joint paths, pelvis path."""

    kind: StepKind
    phases: np.ndarray
    foot: np.ndarray  # (Q, 2) sole point under the swing ankle
    swing_angles: np.ndarray  # (Q, 2) hip, knee
    support_angles: np.ndarray  # (Q, 2)
    com: np.ndarray  # (Q, 2)
    duration: float
    support_side: str
    report: PlanReport

    @property
    def times(self) -> np.ndarray:
        return self.phases * self.duration


def _solve_two_frames(
    base_model: KmpModel,
    db_global: ReferenceDatabase,
    frame_points: tuple[np.ndarray, np.ndarray],
    constraints: list[PhaseConstraint],
    queries: np.ndarray,
    ref_phases: np.ndarray,
):
    """Solve the constrained model in the start and goal frames and fuse."""
    model = base_model.with_database(db_global)
    n = db_global.n
    parts_q = []
    parts_r = []
    iterations = 0
    kkt = 0.0
    for point in frame_points:
        frame = LocalFrame(np.asarray(point, float))
        db_local = project_database(db_global, frame)
        local_cons = [
            PhaseConstraint(
                c.index, c.direction, c.bound - float(c.direction @ frame.translation)
            )
            for c in constraints
        ]
        cs = assemble_constraints(local_cons, n)
        sol = solve_dual_qp(model, db_local, cs)
        iterations += sol.iterations
        kkt = max(kkt, sol.kkt_residual)
        parts_q.append((predict_constrained(model, db_local, cs, sol, queries), frame))
        parts_r.append((predict_constrained(model, db_local, cs, sol, ref_phases), frame))
    fused_q = fuse_local_trajectories(parts_q)
    fused_r = fuse_local_trajectories(parts_r)
    return fused_q, fused_r, iterations, kkt


def _compliant_pitch(model: ExoModel, ankle: np.ndarray, shin: float, ground) -> float:
    """Foot pitch after passive-ankle ground compliance.

    The foot rests at 90 deg to the shin; if heel or toes would dig into
    the ground the ankle complies (up to +-0.7 rad) and the foot settles at
    the pitch minimizing penetration.
    """

    def penetration(pitch: float) -> float:
        heel, toes = foot_contact_array(model, ankle[None, :], np.array([shin]),
                                        foot_pitch=np.array([pitch]))
        t = np.linspace(0.0, 1.0, 9)[:, None]
        sole = heel[0] * (1 - t) + toes[0] * t
        gaps = np.asarray(ground(sole[:, 0])) - sole[:, 1]
        return float(np.max(gaps))

    if penetration(shin) <= 0.0:
        return shin
    grid = shin + np.linspace(-0.7, 0.7, 29)
    pens = [penetration(p) for p in grid]
    best = grid[int(np.argmin(pens))]
    for span in (0.05, 0.01):
        local = best + np.linspace(-span, span, 11)
        pens = [penetration(p) for p in local]
        best = local[int(np.argmin(pens))]
    return float(best)


def _segment_distance(p1, p2, q1, q2) -> float:
    """Distance between two 2-D segments."""

    def seg_point(a, b, p):
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        return float(np.linalg.norm(a + t * ab - p))

    d1 = p2 - p1
    d2 = q2 - q1
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(cross) > 1e-12:
        t = ((q1[0] - p1[0]) * d2[1] - (q1[1] - p1[1]) * d2[0]) / cross
        u = ((q1[0] - p1[0]) * d1[1] - (q1[1] - p1[1]) * d1[0]) / cross
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return 0.0
    return min(
        seg_point(p1, p2, q1),
        seg_point(p1, p2, q2),
        seg_point(q1, q2, p1),
        seg_point(q1, q2, p2),
    )


def _polygon_box_distance(poly: np.ndarray, box: ObstacleBox, base_y: float) -> float:
    """Distance between a closed polygon and an axis-aligned box (0 if touching)."""
    top = base_y + box.height
    bx = [box.x_start, box.x_end]
    inside = np.any(
        (poly[:, 0] >= bx[0]) & (poly[:, 0] <= bx[1])
        & (poly[:, 1] >= base_y) & (poly[:, 1] <= top)
    )
    if inside:
        return 0.0
    box_pts = np.array([[bx[0], base_y], [bx[1], base_y], [bx[1], top], [bx[0], top]])
    # polygon vertex inside box handled above; box corner inside polygon is
    # impossible for our convex foot triangle without an edge crossing
    best = math.inf
    for i in range(len(poly)):
        p1, p2 = poly[i], poly[(i + 1) % len(poly)]
        for j in range(4):
            q1, q2 = box_pts[j], box_pts[(j + 1) % 4]
            best = min(best, _segment_distance(p1, p2, q1, q2))
            if best == 0.0:
                return 0.0
    return best


def plan_step(
    req: StepRequest, foot_model: KmpModel, supp_model: KmpModel
) -> GaitPlan:
    """Run the full per-step pipeline and verify the result before emitting."""
    t0 = time.perf_counter()
    model = req.exo
    warnings: list[str] = []

    com0 = com_from_support(model, req.support_angles)
    ankle0 = foot_from_com(model, com0, req.swing_angles)
    foot0 = PlanarPose(ankle0.x, ankle0.y - model.l3)

    if req.report is not None and req.report.foothold is not None:
        foothold = req.report.foothold
    else:
        foothold = PlanarPose(req.step_length, _nominal_rise(req, req.step_length))
    if foothold.x > model.max_step_length + 1e-9:
        raise InvalidBounds(
            f"foothold x {foothold.x:.3f} exceeds max step length {model.max_step_length:.3f}"
        )
    final = final_configuration(req.kind, model, foothold)

    edge_x = req.edge_x
    if edge_x is None and req.kind.is_stairs and req.report is not None:
        edge_x = req.report.edge_distance

    if req.step_height < max(foot0.y, foothold.y) - 1e-9:
        raise InvalidBounds(
            f"step height {req.step_height:.3f} is below the terrain rise "
            f"{max(foot0.y, foothold.y):.3f}"
        )

    queries = np.linspace(0.0, 1.0, req.n_out)

    # --- support leg -----------------------------------------------------
    supp_start = np.array([req.support_angles.theta_hip, req.support_angles.theta_knee])
    supp_final = np.array(
        [final.support_final.theta_hip, min(final.support_final.theta_knee, KNEE_VIA_CAP)]
    )
    gap = 0.5 / max(supp_model.db.n - 1, 1)
    db_supp = update_via_points(
        supp_model.db,
        [ViaPoint(0.0, supp_start), ViaPoint(1.0, supp_final)],
        gap,
    )

    gap_f = 0.5 / max(foot_model.db.n - 1, 1)
    db_foot = update_via_points(
        foot_model.db,
        [ViaPoint(0.0, foot0.to_array()), ViaPoint(1.0, foothold.to_array())],
        gap_f,
    )
    db_foot = set_step_height_via(db_foot, req.step_height, model.max_step_height)

    supp_cons, swing_cons = boundary_constraints(
        req.kind,
        model,
        db_supp,
        db_foot,
        req.support_angles,
        final.support_final,
        foot0,
        foothold,
        edge_x=edge_x,
    )
    supp_cons = _dedupe(supp_cons)

    supp_q, supp_r, it_s, kkt_s = _solve_two_frames(
        supp_model, db_supp, (supp_start, supp_final), supp_cons, queries, db_supp.s
    )
    com_traj = com_from_support_array(model, supp_q.means[:, 0], supp_q.means[:, 1])

    # --- swing foot -------------------------------------------------------
    profile = step_ground_profile(req.kind, foot0, foothold, edge_x)
    obstacles = list(req.obstacles if req.obstacles is not None else
                     (req.report.obstacles if req.report is not None else ()))
    if req.kind.is_stairs and edge_x is not None:
        rise = abs(foothold.y - foot0.y)
        if rise > 1e-6:
            obstacles.append(ObstacleBox(edge_x - 0.005, 0.01, rise))

    corners_all = []
    for box in obstacles:
        base = float(np.asarray(profile(np.array([box.x_start + box.length / 2])))[0])
        base = min(base, float(np.asarray(profile(np.array([box.x_start])))[0]),
                   float(np.asarray(profile(np.array([box.x_end])))[0]))
        cons, corners = obstacle_constraints(
            box, base, com_traj, model, db_foot, ground=profile
        )
        swing_cons.extend(cons)
        if len(corners):
            corners_all.append((box, base, corners))
    swing_cons = _dedupe(swing_cons)

    x_lo = min(foot0.x, foothold.x)
    x_hi = max(foot0.x, foothold.x)
    foot_q = foot_r = None
    it_f = 0
    kkt_f = 0.0
    for repair_round in range(6):
        foot_q, foot_r, it_r, kkt_r = _solve_two_frames(
            foot_model,
            db_foot,
            (foot0.to_array(), foothold.to_array()),
            swing_cons,
            queries,
            db_foot.s,
        )
        it_f += it_r
        kkt_f = max(kkt_f, kkt_r)
        raises = _interphase_violations(
            foot_q,
            profile,
            x_lo,
            x_hi,
            db_foot.s,
            last_index=db_foot.n - 1,
            current=_current_bounds(swing_cons),
        )
        if not raises or repair_round == 5:
            break
        swing_cons = _dedupe(swing_cons + raises)
    if repair_round:
        warnings.append(
            f"tightened phase bounds against inter-phase dips ({repair_round} round(s))"
        )

    # --- swing leg joints -------------------------------------------------
    ankle_traj = foot_q.means + np.array([0.0, model.l3])
    try:
        th_sw, tk_sw, clamped = leg_ik_array(model, com_traj, ankle_traj, clamp_beyond=IK_CLAMP)
    except Unreachable as exc:
        raise UnreachableConfiguration(f"swing foot path leaves the leg workspace: {exc}") from exc
    if clamped.any():
        warnings.append(
            f"swing IK clamped to full extension at {int(clamped.sum())} samples"
        )
    if (
        np.any(th_sw < model.hip_range[0] - 1e-9)
        or np.any(th_sw > model.hip_range[1] + 1e-9)
        or np.any(tk_sw < model.knee_range[0] - 1e-9)
    ):
        raise OutOfRange("swing joint trajectory violates joint limits")

    # --- verification ------------------------------------------------------
    slack_min = math.inf
    for cons, traj in ((supp_cons, supp_r), (swing_cons, foot_r)):
        for c in cons:
            slack = float(c.direction @ traj.means[c.index] - c.bound)
            slack_min = min(slack_min, slack)

    shin = th_sw + tk_sw
    pen_max = 0.0
    clearances = [math.inf] * len(corners_all)
    for i in range(req.n_out):
        pitch = _compliant_pitch(model, ankle_traj[i], float(shin[i]), profile)
        heel, toes = foot_contact_array(
            model, ankle_traj[i][None, :], np.array([shin[i]]), foot_pitch=np.array([pitch])
        )
        t = np.linspace(0.0, 1.0, 9)[:, None]
        sole = heel[0] * (1 - t) + toes[0] * t
        pen = float(np.max(np.asarray(profile(sole[:, 0])) - sole[:, 1]))
        pen_max = max(pen_max, pen)
        poly = np.array([heel[0], toes[0], ankle_traj[i]])
        for j, (box, base, _) in enumerate(corners_all):
            clearances[j] = min(clearances[j], _polygon_box_distance(poly, box, base))

    e_start = float(np.linalg.norm(foot_q.means[0] - foot0.to_array()))
    e_goal = float(np.linalg.norm(foot_q.means[-1] - foothold.to_array()))
    peak_error = None
    if req.kind is StepKind.FLAT:
        peak_error = float(np.max(foot_q.means[:, 1]) - req.step_height)
    knee_max = float(max(np.max(supp_q.means[:, 1]), np.max(tk_sw)))
    hip = supp_q.means[:, 0]
    direction = -1.0 if supp_final[0] <= supp_start[0] else 1.0
    increments = np.diff(hip) * direction  # positive = moving the right way
    hip_defect = float(np.max(np.maximum(-increments, 0.0), initial=0.0))

    report = PlanReport(
        n_constraints=len(supp_cons) + len(swing_cons),
        boundary_slack_min=slack_min,
        endpoint_error_start=e_start,
        endpoint_error_goal=e_goal,
        peak_error=peak_error,
        ground_penetration_max=pen_max,
        obstacle_clearances=tuple(clearances),
        knee_max=knee_max,
        hip_monotonicity_defect=hip_defect,
        qp_iterations=it_s + it_f,
        kkt_residual_max=max(kkt_s, kkt_f),
        solve_time=time.perf_counter() - t0,
        warnings=tuple(warnings),
    )

    failures = []
    if report.boundary_slack_min < SLACK_GATE:
        failures.append(f"constraint slack {report.boundary_slack_min:.2e}")
    if report.ground_penetration_max > PENETRATION_GATE:
        failures.append(f"ground penetration {report.ground_penetration_max:.4f} m")
    if any(c < 0.0 for c in report.obstacle_clearances):
        failures.append("obstacle clearance negative")
    if report.knee_max > KNEE_GATE:
        failures.append(f"knee extension {report.knee_max:.2e}")
    if max(report.endpoint_error_start, report.endpoint_error_goal) > ENDPOINT_GATE:
        failures.append("endpoint error above 1 mm")
    if failures:
        raise PlanInfeasible("; ".join(failures))

    return GaitPlan(
        kind=req.kind,
        phases=queries,
        foot=foot_q.means,
        swing_angles=np.column_stack([th_sw, tk_sw]),
        support_angles=supp_q.means,
        com=com_traj,
        duration=req.duration,
        support_side=req.support_side,
        report=report,
    )


def _nominal_rise(req: StepRequest, x: float) -> float:
    """Terrain rise at the foothold when no perception report is given."""
    kind = req.kind
    if kind is StepKind.FLAT or kind.is_closing:
        return 0.0
    if kind in (StepKind.SLOPE_UP, StepKind.SLOPE_DOWN):
        report = req.report
        slope_deg = report.slope_deg if report is not None and report.slope_deg else 0.0
        sign = 1.0 if kind is StepKind.SLOPE_UP else -1.0
        return sign * math.tan(math.radians(slope_deg)) * x
    report = req.report
    h = report.stair_height if report is not None and report.stair_height else 0.0
    return h if kind is StepKind.STAIRS_UP else -h


def standing_start(model: ExoModel) -> tuple[LegAngles, LegAngles]:
    """Both legs straight, feet together: the rest pose."""
    straight = LegAngles(0.0, 0.0)
    return straight, straight


def steady_start(
    kind: StepKind, model: ExoModel, prev_foothold: PlanarPose
) -> tuple[LegAngles, LegAngles]:
    """Stance after a previous step of the same kind just landed.

    Returns (support_angles, swing_angles) for the new step: the landed leg
    becomes the support, the old support trails one step behind.
    """
    prev = final_configuration(kind, model, prev_foothold)
    hip_rel = PlanarPose(
        prev.com_final.x - prev_foothold.x, prev.com_final.y - prev_foothold.y
    )
    support = leg_ik(model, hip_rel, PlanarPose(0.0, model.l3), clamp_beyond=1e-6)
    return support, prev.support_final


def chain_state(plan: GaitPlan, foothold: PlanarPose):
    """Stance angles and frame shift for the step after ``plan``."""
    support = LegAngles(float(plan.swing_angles[-1, 0]), float(plan.swing_angles[-1, 1]))
    swing = LegAngles(float(plan.support_angles[-1, 0]), float(plan.support_angles[-1, 1]))
    return support, swing, foothold
