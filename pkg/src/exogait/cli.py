"""Command-line toolchain.

Subcommands: ``train`` (demonstrations -> model file), ``perceive`` (point
cloud -> terrain report), ``plan`` (model + terrain -> step plan CSV/SVG)
and ``simulate`` (scenario script -> chained plans + summary).

Exit codes: 0 ok, 2 malformed input file, 3 model fit failure, 4 perception
failure, 5 planning failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io as gio
from .config import RunConfig, load_config
from .environment import PointCloud, Terrain, TerrainReport, perceive, report_from_scene
from .environment import FootholdParams
from .errors import (
    AmbiguousTerrain,
    ExogaitError,
    FormatError,
    NoPlaneFound,
    NoValidFoothold,
    TooFewPoints,
)
from .kinematics import LegAngles, PlanarPose
from .kmp import KmpModel
from .learning import build_reference_database
from .planner import (
    GaitPlan,
    StepKind,
    StepRequest,
    chain_state,
    kind_from_terrain,
    max_descend_step,
    plan_step,
    standing_start,
    steady_start,
    step_ground_profile,
)
from .svg import render_plan_svg

EXIT_FORMAT = 2
EXIT_FIT = 3
EXIT_PERCEPTION = 4
EXIT_PLAN = 5


def _load_runconfig(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config = RunConfig(
            exo=config.exo, foot=config.foot, supp=config.supp,
            gait=config.gait, camera_to_com=config.camera_to_com, seed=args.seed,
        )
    return config


def cmd_train(args) -> int:
    config = _load_runconfig(args)
    try:
        foot_demos, supp_demos = gio.read_demo_csv(args.demos)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    try:
        n_ref = config.gait.reference_points
        foot_db, foot_gmm = build_reference_database(
            foot_demos, config.foot.n_components, n_ref, config.seed, return_gmm=True
        )
        supp_db, supp_gmm = build_reference_database(
            supp_demos, config.supp.n_components, n_ref, config.seed + 1, return_gmm=True
        )
    except (TooFewPoints, ExogaitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    foot_model = KmpModel.from_database(
        foot_db, config.foot.kernel_decay, config.foot.mean_reg, config.foot.cov_reg
    )
    supp_model = KmpModel.from_database(
        supp_db, config.supp.kernel_decay, config.supp.mean_reg, config.supp.cov_reg
    )
    gio.save_models(args.out, foot_model, supp_model)
    for name, gmm, db in (("swing foot", foot_gmm, foot_db), ("support leg", supp_gmm, supp_db)):
        print(
            f"{name}: {gmm.n_components} components, "
            f"log-likelihood {gmm.log_likelihood_trace[-1]:.2f}, "
            f"{db.n} reference points, "
            f"mean spread {np.mean(np.sqrt(db.cov[:, 0, 0] + db.cov[:, 1, 1])):.4f}"
        )
    print(f"model written to {args.out}")
    return 0


def cmd_perceive(args) -> int:
    config = _load_runconfig(args)
    try:
        cloud = gio.read_cloud(args.cloud)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    offset = np.array(config.camera_to_com)
    if np.any(offset != 0.0):
        cloud = PointCloud(cloud.points + offset)
    foothold_params = FootholdParams(mean_step_length=config.gait.mean_step_length)
    try:
        report = perceive(cloud, config.exo, foothold=foothold_params, seed=config.seed)
    except (NoPlaneFound, AmbiguousTerrain, NoValidFoothold) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PERCEPTION
    gio.write_report(args.out, report)
    geo = []
    if report.slope_deg is not None:
        geo.append(f"slope {report.slope_deg:.2f} deg")
    if report.stair_height is not None:
        geo.append(
            f"stair height {report.stair_height:.3f} m, tread {report.tread_length:.3f} m, "
            f"edge at {report.edge_distance:.3f} m"
        )
    print(
        f"terrain: {report.terrain.value}"
        + (f" ({'; '.join(geo)})" if geo else "")
        + f", {len(report.obstacles)} obstacle(s), foothold at "
        f"({report.foothold.x:.3f}, {report.foothold.y:.3f})"
    )
    print(f"report written to {args.out}")
    return 0


def _default_height(kind: StepKind, rise: float, start_y: float, config: RunConfig) -> float:
    base = max(rise, start_y, 0.0) + config.gait.clearance
    return max(config.gait.default_step_height, base)


def _build_request(
    config: RunConfig,
    kind: StepKind,
    report: TerrainReport | None,
    step_length: float,
    step_height: float | None,
    start_mode: str,
    edge_x: float | None,
    n_out: int,
) -> StepRequest:
    model = config.exo
    if report is not None and report.foothold is not None:
        goal = report.foothold
    else:
        rise = 0.0
        if report is not None:
            if kind in (StepKind.SLOPE_UP, StepKind.SLOPE_DOWN) and report.slope_deg:
                sign = 1.0 if kind is StepKind.SLOPE_UP else -1.0
                rise = sign * np.tan(np.radians(report.slope_deg)) * step_length
            elif kind is StepKind.STAIRS_UP and report.stair_height:
                rise = report.stair_height
            elif kind is StepKind.STAIRS_DOWN and report.stair_height:
                rise = -report.stair_height
        goal = PlanarPose(step_length, rise)
    if start_mode == "standing":
        support, swing = standing_start(model)
    else:
        steady_kind = StepKind.FLAT if kind.is_stairs else kind
        prev_goal = goal if steady_kind is kind else PlanarPose(goal.x, 0.0)
        support, swing = steady_start(steady_kind, model, prev_goal)
    if step_height is None:
        step_height = _default_height(kind, goal.y, 0.0, config)
    return StepRequest(
        kind=kind,
        exo=model,
        support_angles=support,
        swing_angles=swing,
        step_length=step_length,
        step_height=step_height,
        report=report,
        edge_x=edge_x,
        duration=config.gait.step_duration,
        n_out=n_out,
        support_side="left",
    )


def _write_plan_outputs(out_dir: Path, stem: str, plan: GaitPlan, req: StepRequest) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    gio.write_plan_csv(out_dir / f"{stem}.csv", plan)
    goal = PlanarPose(float(plan.foot[-1, 0]), float(plan.foot[-1, 1]))
    start = PlanarPose(float(plan.foot[0, 0]), float(plan.foot[0, 1]))
    profile = step_ground_profile(plan.kind, start, goal, req.edge_x)
    boxes = []
    obstacles = req.obstacles if req.obstacles is not None else (
        req.report.obstacles if req.report is not None else ()
    )
    for box in obstacles:
        base = float(np.asarray(profile(np.array([box.x_start])))[0])
        boxes.append((box, base))
    svg = render_plan_svg(plan, req.exo, profile, boxes)
    (out_dir / f"{stem}.svg").write_text(svg, encoding="utf-8")


def _print_report(plan: GaitPlan) -> None:
    r = plan.report
    print(
        f"constraints: {r.n_constraints}, min slack {r.boundary_slack_min:.2e}, "
        f"kkt {r.kkt_residual_max:.2e}"
    )
    print(
        f"endpoints: start {r.endpoint_error_start * 1000:.3f} mm, "
        f"goal {r.endpoint_error_goal * 1000:.3f} mm"
        + (f", peak error {r.peak_error * 1000:.3f} mm" if r.peak_error is not None else "")
    )
    clear = (
        ", ".join(f"{c * 1000:.1f} mm" for c in r.obstacle_clearances)
        if r.obstacle_clearances
        else "n/a"
    )
    print(
        f"ground penetration {r.ground_penetration_max * 1000:.3f} mm, "
        f"obstacle clearance {clear}, knee max {r.knee_max:.2e} rad"
    )
    for warning in r.warnings:
        print(f"warning: {warning}")
    print(f"planned in {r.solve_time:.3f} s")


def cmd_plan(args) -> int:
    config = _load_runconfig(args)
    try:
        foot_model, supp_model = gio.load_models(args.model)
        report = None
        if args.report:
            report = gio.read_report(args.report)
        elif args.scene:
            scene = gio.read_scene(args.scene)
            report = report_from_scene(
                scene, config.exo,
                FootholdParams(mean_step_length=args.step_length or config.gait.mean_step_length),
            )
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (NoValidFoothold, NoPlaneFound, AmbiguousTerrain) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PERCEPTION

    kind = StepKind(args.kind) if args.kind else (
        kind_from_terrain(report.terrain) if report else StepKind.FLAT
    )
    if kind.is_closing:
        print("error: closing steps are planned by 'simulate' (they chain a first step)",
              file=sys.stderr)
        return EXIT_FORMAT
    step_length = args.step_length
    if step_length is None:
        step_length = (
            report.foothold.x if report and report.foothold else config.gait.mean_step_length
        )
    edge_x = report.edge_distance if (report and kind.is_stairs) else None
    try:
        req = _build_request(
            config, kind, report, step_length, args.step_height, args.start, edge_x, args.n_out
        )
        t0 = time.perf_counter()
        plan = plan_step(req, foot_model, supp_model)
        wall = time.perf_counter() - t0
    except ExogaitError as exc:
        print(f"error: planning failed: {exc}", file=sys.stderr)
        return EXIT_PLAN
    _write_plan_outputs(Path(args.out), "plan", plan, req)
    _print_report(plan)
    print(f"wall time {wall:.3f} s; outputs in {args.out}")
    return 0


def cmd_simulate(args) -> int:
    config = _load_runconfig(args)
    try:
        foot_model, supp_model = gio.load_models(args.model)
        steps = gio.read_scenario(args.scenario)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = config.exo

    support, swing = standing_start(model)
    last_edge: float | None = None  # riser position in the current frame
    last_goal = PlanarPose(0.0, 0.0)
    rows = ["index,kind,step_length,step_height,slack_min,peak_y,penetration,clearance_min,time_s"]
    for index, spec in enumerate(steps):
        kind: StepKind = spec["kind"]
        report = None
        edge_x = None
        if kind.is_closing:
            step_length = spec.get("step_length", 0.0)
            edge_x = spec.get("edge_x", last_edge)
            start_foot_y = max(0.0, -last_goal.y)  # trailing foot height in this frame
            step_height = spec.get("step_height", start_foot_y + config.gait.clearance)
        else:
            stair_h = spec.get("stair_height", 0.15)
            slope_deg = spec.get("slope_deg", 10.0)
            step_length = spec.get("step_length", config.gait.mean_step_length)
            if kind is StepKind.STAIRS_DOWN:
                step_length = min(step_length, 0.85 * max_descend_step(model, stair_h))
            if kind.is_stairs:
                edge_x = spec.get("edge_distance", 0.45 * step_length)
            report = TerrainReport(
                terrain=Terrain(kind.value),
                slope_deg=slope_deg
                if kind in (StepKind.SLOPE_UP, StepKind.SLOPE_DOWN)
                else None,
                stair_height=stair_h if kind.is_stairs else None,
                edge_distance=edge_x,
            )
            rise = 0.0
            if kind is StepKind.SLOPE_UP:
                rise = np.tan(np.radians(slope_deg)) * step_length
            elif kind is StepKind.STAIRS_UP:
                rise = stair_h
            step_height = spec.get("step_height", _default_height(kind, rise, 0.0, config))
        try:
            req = StepRequest(
                kind=kind,
                exo=model,
                support_angles=support,
                swing_angles=swing,
                step_length=step_length,
                step_height=step_height,
                report=report,
                edge_x=edge_x,
                duration=config.gait.step_duration,
                n_out=args.n_out,
                support_side="left" if index % 2 == 0 else "right",
            )
            plan = plan_step(req, foot_model, supp_model)
        except ExogaitError as exc:
            print(f"error: step {index} ({kind.value}) failed: {exc}", file=sys.stderr)
            return EXIT_PLAN
        _write_plan_outputs(out_dir, f"step_{index:03d}", plan, req)
        r = plan.report
        goal = PlanarPose(float(plan.foot[-1, 0]), float(plan.foot[-1, 1]))
        rows.append(
            f"{index},{kind.value},{gio.fmt(goal.x)},{gio.fmt(req.step_height)},"
            f"{gio.fmt(r.boundary_slack_min)},{gio.fmt(float(np.max(plan.foot[:, 1])))},"
            f"{gio.fmt(r.ground_penetration_max)},"
            f"{gio.fmt(min(r.obstacle_clearances) if r.obstacle_clearances else np.inf)},"
            f"{gio.fmt(r.solve_time)}"
        )
        print(
            f"step {index}: {kind.value}, goal ({goal.x:.3f}, {goal.y:.3f}), "
            f"slack {r.boundary_slack_min:.1e}, time {r.solve_time:.3f} s"
        )
        support, swing, shift = chain_state(plan, goal)
        if kind.is_stairs and not kind.is_closing and edge_x is not None:
            last_edge = edge_x - shift.x
        else:
            last_edge = None
        last_goal = goal
    (out_dir / "summary.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"{len(steps)} step(s) planned; summary in {out_dir / 'summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exogait",
        description="Multi-terrain exoskeleton gait planning toolchain",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit trajectory models from a demonstration CSV")
    p_train.add_argument("--demos", required=True, help="demonstration CSV file")
    p_train.add_argument("--out", required=True, help="output model file")
    p_train.add_argument("--config", help="JSON run configuration")
    p_train.add_argument("--seed", type=int, help="override the config seed")
    p_train.set_defaults(func=cmd_train)

    p_perc = sub.add_parser("perceive", help="terrain report from a point-cloud file")
    p_perc.add_argument("--cloud", required=True, help="plain-text x y z point cloud")
    p_perc.add_argument("--out", required=True, help="output terrain report file")
    p_perc.add_argument("--config", help="JSON run configuration")
    p_perc.add_argument("--seed", type=int, help="override the config seed")
    p_perc.set_defaults(func=cmd_perceive)

    p_plan = sub.add_parser("plan", help="plan one step from a terrain report or scene")
    p_plan.add_argument("--model", required=True, help="trained model file")
    group = p_plan.add_mutually_exclusive_group()
    group.add_argument("--report", help="terrain report file")
    group.add_argument("--scene", help="scene description file (ground-truth bypass)")
    p_plan.add_argument("--out", required=True, help="output directory")
    p_plan.add_argument("--step-length", type=float, dest="step_length")
    p_plan.add_argument("--step-height", type=float, dest="step_height")
    p_plan.add_argument("--kind", choices=[k.value for k in StepKind])
    p_plan.add_argument("--start", choices=["steady", "standing"], default="steady")
    p_plan.add_argument("--n-out", type=int, dest="n_out", default=100)
    p_plan.add_argument("--config", help="JSON run configuration")
    p_plan.add_argument("--seed", type=int, help="override the config seed")
    p_plan.set_defaults(func=cmd_plan)

    p_sim = sub.add_parser("simulate", help="run a multi-step scenario script")
    p_sim.add_argument("--model", required=True, help="trained model file")
    p_sim.add_argument("--scenario", required=True, help="scenario script")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--n-out", type=int, dest="n_out", default=100)
    p_sim.add_argument("--config", help="JSON run configuration")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
