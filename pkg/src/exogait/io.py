"""File formats: demonstrations, trained models, scenes, clouds, terrain
reports, gait plans and scenario scripts.

Every format is plain text with a versioned header line and is documented
in ``docs/formats.md``.  Floats are written with 17 significant digits so
files round-trip bit-exactly and reruns with the same seed are
byte-identical.
"""

from __future__ import annotations

import io as _stdio
from pathlib import Path

import numpy as np

from .environment import ObstacleBox, Plane, PointCloud, Scene, Terrain, TerrainReport
from .errors import FormatError
from .kinematics import PlanarPose
from .kmp import KmpModel
from .learning import Demonstration, ReferenceDatabase
from .planner import GaitPlan, StepKind

__all__ = [
    "fmt",
    "read_demo_csv",
    "write_demo_csv",
    "save_models",
    "load_models",
    "read_scene",
    "write_scene",
    "read_cloud",
    "write_cloud",
    "read_report",
    "write_report",
    "write_plan_csv",
    "read_plan_csv",
    "read_scenario",
    "write_scenario",
]

DEMO_HEADER = "step_id,s,x_foot,y_foot,theta_hip_supp,theta_knee_supp"
MODEL_MAGIC = "exogait-model v1"
SCENE_MAGIC = "exogait-scene v1"
REPORT_MAGIC = "exogait-report v1"
SCENARIO_MAGIC = "exogait-scenario v1"


def fmt(x: float) -> str:
    """Canonical float encoding: 17 significant digits."""
    return format(float(x), ".17g")


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise FormatError(f"{where}: bad number {token!r}") from exc


# --- demonstrations -------------------------------------------------------


def read_demo_csv(path) -> tuple[list[Demonstration], list[Demonstration]]:
    """Read a demonstration CSV into (foot demos, support-leg demos)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty demonstration file")
    if lines[0].strip() != DEMO_HEADER:
        raise FormatError(f"{path}: header must be {DEMO_HEADER!r}")
    rows: dict[int, list[tuple[float, ...]]] = {}
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise FormatError(f"{path}:{i}: expected 6 columns, got {len(parts)}")
        try:
            step = int(parts[0])
        except ValueError as exc:
            raise FormatError(f"{path}:{i}: bad step_id {parts[0]!r}") from exc
        values = tuple(_parse_float(p, f"{path}:{i}") for p in parts[1:])
        rows.setdefault(step, []).append(values)
    foot, supp = [], []
    for step in sorted(rows):
        data = np.array(sorted(rows[step]))
        s = data[:, 0]
        if np.any(np.diff(s) <= 0):
            raise FormatError(f"{path}: step {step} has non-increasing phases")
        foot.append(Demonstration(step, s, data[:, 1:3]))
        supp.append(Demonstration(step, s, data[:, 3:5]))
    return foot, supp


def write_demo_csv(path, foot: list[Demonstration], supp: list[Demonstration]) -> None:
    out = _stdio.StringIO()
    out.write(DEMO_HEADER + "\n")
    for fd, sd in zip(foot, supp):
        for i in range(fd.s.size):
            out.write(
                f"{fd.step_id},{fmt(fd.s[i])},{fmt(fd.xi[i, 0])},{fmt(fd.xi[i, 1])},"
                f"{fmt(sd.xi[i, 0])},{fmt(sd.xi[i, 1])}\n"
            )
    Path(path).write_text(out.getvalue(), encoding="utf-8")


# --- trained models -------------------------------------------------------


def _write_db(out, db: ReferenceDatabase) -> None:
    out.write(f"entries {db.n}\n")
    for i in range(db.n):
        c = db.cov[i]
        out.write(
            "entry "
            + " ".join(
                fmt(v)
                for v in (db.s[i], db.mu[i, 0], db.mu[i, 1], c[0, 0], c[0, 1], c[1, 1])
            )
            + "\n"
        )


def save_models(path, foot: KmpModel, supp: KmpModel) -> None:
    out = _stdio.StringIO()
    out.write(MODEL_MAGIC + "\n")
    for name, model in (("foot", foot), ("supp", supp)):
        out.write(f"section {name}\n")
        out.write(f"kernel_decay {fmt(model.kernel_decay)}\n")
        out.write(f"mean_reg {fmt(model.mean_reg)}\n")
        out.write(f"cov_reg {fmt(model.cov_reg)}\n")
        _write_db(out, model.db)
    out.write("end\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")


def load_models(path) -> tuple[KmpModel, KmpModel]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file (missing {MODEL_MAGIC!r})")
    sections: dict[str, KmpModel] = {}
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        if not line or line == "end":
            i += 1
            continue
        if not line.startswith("section "):
            raise FormatError(f"{path}:{i + 1}: expected 'section', got {line!r}")
        name = line.split()[1]
        params = {}
        i += 1
        for key in ("kernel_decay", "mean_reg", "cov_reg"):
            tokens = lines[i].split()
            if len(tokens) != 2 or tokens[0] != key:
                raise FormatError(f"{path}:{i + 1}: expected '{key} <value>'")
            params[key] = _parse_float(tokens[1], f"{path}:{i + 1}")
            i += 1
        tokens = lines[i].split()
        if len(tokens) != 2 or tokens[0] != "entries":
            raise FormatError(f"{path}:{i + 1}: expected 'entries <count>'")
        n = int(tokens[1])
        i += 1
        s = np.empty(n)
        mu = np.empty((n, 2))
        cov = np.empty((n, 2, 2))
        for k in range(n):
            tokens = lines[i].split()
            if len(tokens) != 7 or tokens[0] != "entry":
                raise FormatError(f"{path}:{i + 1}: expected 'entry' with 6 numbers")
            vals = [_parse_float(t, f"{path}:{i + 1}") for t in tokens[1:]]
            s[k] = vals[0]
            mu[k] = vals[1:3]
            cov[k] = [[vals[3], vals[4]], [vals[4], vals[5]]]
            i += 1
        sections[name] = KmpModel.from_database(
            ReferenceDatabase(s, mu, cov),
            params["kernel_decay"],
            params["mean_reg"],
            params["cov_reg"],
        )
    if "foot" not in sections or "supp" not in sections:
        raise FormatError(f"{path}: model file needs 'foot' and 'supp' sections")
    return sections["foot"], sections["supp"]


# --- scenes & clouds ------------------------------------------------------


def write_scene(path, scene: Scene) -> None:
    out = _stdio.StringIO()
    out.write(SCENE_MAGIC + "\n")
    out.write(f"terrain {scene.terrain.value}\n")
    out.write(f"slope_deg {fmt(scene.slope_deg)}\n")
    out.write(f"stair_height {fmt(scene.stair_height)}\n")
    out.write(f"tread_length {fmt(scene.tread_length)}\n")
    out.write(f"edge_distance {fmt(scene.edge_distance)}\n")
    out.write(f"noise_sigma {fmt(scene.noise_sigma)}\n")
    out.write(f"outlier_fraction {fmt(scene.outlier_fraction)}\n")
    for box in scene.obstacles:
        out.write(f"obstacle {fmt(box.x_start)} {fmt(box.length)} {fmt(box.height)}\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")


def read_scene(path) -> Scene:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != SCENE_MAGIC:
        raise FormatError(f"{path}: not a scene file (missing {SCENE_MAGIC!r})")
    fields: dict[str, float] = {}
    terrain = None
    obstacles = []
    for idx, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "terrain":
            try:
                terrain = Terrain(tokens[1])
            except ValueError as exc:
                raise FormatError(f"{path}:{idx}: unknown terrain {tokens[1]!r}") from exc
        elif tokens[0] == "obstacle":
            if len(tokens) != 4:
                raise FormatError(f"{path}:{idx}: obstacle needs x_start length height")
            obstacles.append(
                ObstacleBox(*(_parse_float(t, f"{path}:{idx}") for t in tokens[1:]))
            )
        elif len(tokens) == 2:
            fields[tokens[0]] = _parse_float(tokens[1], f"{path}:{idx}")
        else:
            raise FormatError(f"{path}:{idx}: unrecognized line {line!r}")
    if terrain is None:
        raise FormatError(f"{path}: missing terrain line")
    return Scene(
        terrain=terrain,
        slope_deg=fields.get("slope_deg", 0.0),
        stair_height=fields.get("stair_height", 0.0),
        tread_length=fields.get("tread_length", 0.30),
        edge_distance=fields.get("edge_distance", 0.25),
        obstacles=tuple(obstacles),
        noise_sigma=fields.get("noise_sigma", 0.0),
        outlier_fraction=fields.get("outlier_fraction", 0.0),
    )


def write_cloud(path, cloud: PointCloud) -> None:
    out = _stdio.StringIO()
    for p in cloud.points:
        out.write(f"{fmt(p[0])} {fmt(p[1])} {fmt(p[2])}\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")


def read_cloud(path) -> PointCloud:
    points = []
    text = Path(path).read_text(encoding="utf-8")
    for idx, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 3:
            raise FormatError(f"{path}:{idx}: expected 'x y z', got {line!r}")
        points.append([_parse_float(t, f"{path}:{idx}") for t in tokens])
    if not points:
        raise FormatError(f"{path}: no points")
    return PointCloud(np.array(points))


# --- terrain reports ------------------------------------------------------


def write_report(path, report: TerrainReport) -> None:
    out = _stdio.StringIO()
    out.write(REPORT_MAGIC + "\n")
    out.write(f"terrain {report.terrain.value}\n")
    for key in ("slope_deg", "stair_height", "tread_length", "edge_distance"):
        value = getattr(report, key)
        if value is not None:
            out.write(f"{key} {fmt(value)}\n")
    for plane in report.planes:
        out.write(
            "plane "
            + " ".join(fmt(v) for v in (*plane.normal, plane.offset))
            + f" {plane.n_inliers}\n"
        )
    for box in report.obstacles:
        out.write(f"obstacle {fmt(box.x_start)} {fmt(box.length)} {fmt(box.height)}\n")
    if report.foothold is not None:
        out.write(f"foothold {fmt(report.foothold.x)} {fmt(report.foothold.y)}\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")


def read_report(path) -> TerrainReport:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != REPORT_MAGIC:
        raise FormatError(f"{path}: not a report file (missing {REPORT_MAGIC!r})")
    terrain = None
    fields: dict[str, float] = {}
    obstacles = []
    foothold = None
    planes = []
    for idx, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "terrain":
            terrain = Terrain(tokens[1])
        elif tokens[0] == "obstacle":
            obstacles.append(
                ObstacleBox(*(_parse_float(t, f"{path}:{idx}") for t in tokens[1:4]))
            )
        elif tokens[0] == "foothold":
            foothold = PlanarPose(
                _parse_float(tokens[1], f"{path}:{idx}"),
                _parse_float(tokens[2], f"{path}:{idx}"),
            )
        elif tokens[0] == "plane":
            vals = [_parse_float(t, f"{path}:{idx}") for t in tokens[1:5]]
            normal = np.array(vals[:3])
            normal = normal / np.linalg.norm(normal)
            planes.append(Plane(normal, vals[3], np.zeros((0, 3))))
        elif len(tokens) == 2:
            fields[tokens[0]] = _parse_float(tokens[1], f"{path}:{idx}")
        else:
            raise FormatError(f"{path}:{idx}: unrecognized line {line!r}")
    if terrain is None:
        raise FormatError(f"{path}: missing terrain line")
    return TerrainReport(
        terrain=terrain,
        slope_deg=fields.get("slope_deg"),
        stair_height=fields.get("stair_height"),
        tread_length=fields.get("tread_length"),
        edge_distance=fields.get("edge_distance"),
        planes=tuple(planes),
        obstacles=tuple(obstacles),
        foothold=foothold,
    )


# --- plans ----------------------------------------------------------------

PLAN_HEADER = (
    "phase,x_foot,y_foot,theta_hip_swing,theta_knee_swing,"
    "theta_hip_supp,theta_knee_supp,x_com,y_com"
)


def write_plan_csv(path, plan: GaitPlan) -> None:
    out = _stdio.StringIO()
    out.write(PLAN_HEADER + "\n")
    for i in range(plan.phases.size):
        row = (
            plan.phases[i],
            plan.foot[i, 0],
            plan.foot[i, 1],
            plan.swing_angles[i, 0],
            plan.swing_angles[i, 1],
            plan.support_angles[i, 0],
            plan.support_angles[i, 1],
            plan.com[i, 0],
            plan.com[i, 1],
        )
        out.write(",".join(fmt(v) for v in row) + "\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")


def read_plan_csv(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != PLAN_HEADER:
        raise FormatError(f"{path}: bad plan header")
    names = PLAN_HEADER.split(",")
    data = []
    for idx, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tokens = line.split(",")
        if len(tokens) != len(names):
            raise FormatError(f"{path}:{idx}: expected {len(names)} columns")
        data.append([_parse_float(t, f"{path}:{idx}") for t in tokens])
    arr = np.array(data)
    return {name: arr[:, k] for k, name in enumerate(names)}


# --- scenarios --------------------------------------------------------------


def read_scenario(path) -> list[dict]:
    """Scenario script: one 'step <kind> key=value ...' line per step."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != SCENARIO_MAGIC:
        raise FormatError(f"{path}: not a scenario file (missing {SCENARIO_MAGIC!r})")
    steps = []
    for idx, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] != "step" or len(tokens) < 2:
            raise FormatError(f"{path}:{idx}: expected 'step <kind> [key=value ...]'")
        try:
            kind = StepKind(tokens[1])
        except ValueError as exc:
            raise FormatError(f"{path}:{idx}: unknown step kind {tokens[1]!r}") from exc
        params: dict[str, float] = {}
        for tok in tokens[2:]:
            if "=" not in tok:
                raise FormatError(f"{path}:{idx}: expected key=value, got {tok!r}")
            key, value = tok.split("=", 1)
            params[key] = _parse_float(value, f"{path}:{idx}")
        steps.append({"kind": kind, **params})
    return steps


def write_scenario(path, steps: list[dict]) -> None:
    out = _stdio.StringIO()
    out.write(SCENARIO_MAGIC + "\n")
    for step in steps:
        kind = step["kind"]
        extras = " ".join(
            f"{k}={fmt(v)}" for k, v in step.items() if k != "kind"
        )
        out.write(f"step {kind.value}{' ' + extras if extras else ''}\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")
