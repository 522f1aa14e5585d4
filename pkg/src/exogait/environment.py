"""Synthetic terrain perception.

Point clouds live in a camera-aligned frame with x forward, y lateral and
z up; the sagittal plane used by the planner is (x, z).  The pipeline is:

    synthesize_cloud -> segment_planes (MLESAC) -> classify_terrain
                     -> cluster_obstacles -> select_foothold

The cloud generator replaces a depth camera for tests and experiments; the
rest of the pipeline never looks at the scene description.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import AmbiguousTerrain, NoPlaneFound, NoValidFoothold
from .kinematics import ExoModel, PlanarPose

__all__ = [
    "Terrain",
    "Scene",
    "PointCloud",
    "Plane",
    "ObstacleBox",
    "TerrainReport",
    "MlesacParams",
    "ClusterParams",
    "FootholdParams",
    "synthesize_cloud",
    "mlesac_plane",
    "segment_planes",
    "classify_terrain",
    "cluster_obstacles",
    "select_foothold",
    "slope_contact_lift",
    "perceive",
    "report_from_scene",
    "ground_profile",
]


class Terrain(enum.Enum):
    FLAT = "flat"
    SLOPE_UP = "slope_up"
    SLOPE_DOWN = "slope_down"
    STAIRS_UP = "stairs_up"
    STAIRS_DOWN = "stairs_down"


@dataclass(frozen=True)
class ObstacleBox:
    """Sagittal bounding box of an obstacle resting on the ground."""

    x_start: float
    length: float
    height: float

    def __post_init__(self):
        if self.length <= 0 or self.height <= 0:
            raise ValueError("obstacle length and height must be positive")

    @property
    def x_end(self) -> float:
        return self.x_start + self.length


@dataclass(frozen=True)
class Scene:
    """Ground-truth description of one synthetic walking scene."""

    terrain: Terrain = Terrain.FLAT
    slope_deg: float = 0.0
    stair_height: float = 0.0
    tread_length: float = 0.30
    edge_distance: float = 0.25
    obstacles: tuple[ObstacleBox, ...] = ()
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    span: tuple[float, float] = (-0.4, 1.6)
    width: float = 1.0

    def __post_init__(self):
        if self.terrain in (Terrain.SLOPE_UP, Terrain.SLOPE_DOWN):
            if not 0.0 < self.slope_deg < 45.0:
                raise ValueError("slope_deg must lie in (0, 45) for slopes")
        if self.terrain in (Terrain.STAIRS_UP, Terrain.STAIRS_DOWN):
            if self.stair_height <= 0:
                raise ValueError("stair_height must be positive for stairs")
            if self.tread_length <= 0 or self.edge_distance <= 0:
                raise ValueError("tread_length and edge_distance must be positive")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3)

    def __post_init__(self):
        p = np.asarray(self.points, float)
        object.__setattr__(self, "points", p.reshape(-1, 3))
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point cloud must be finite")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Plane:
    """Plane n . p = d with unit normal (n_z >= 0) and its inlier points."""

    normal: np.ndarray
    offset: float
    inliers: np.ndarray  # (k, 3)

    def __post_init__(self):
        n = np.asarray(self.normal, float).reshape(3)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "inliers", np.asarray(self.inliers, float).reshape(-1, 3))
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")

    @property
    def n_inliers(self) -> int:
        return self.inliers.shape[0]

    @property
    def tilt_deg(self) -> float:
        """Angle between the normal and the vertical axis, degrees."""
        return math.degrees(math.acos(min(1.0, abs(self.normal[2]))))

    def height_at(self, x: float) -> float:
        """z of the plane at forward distance x on the sagittal line (y = 0)."""
        nz = self.normal[2]
        if abs(nz) < 1e-9:
            return math.nan
        return (self.offset - self.normal[0] * x) / nz


@dataclass(frozen=True)
class TerrainReport:
    """Everything the planner needs to know about the scene ahead."""

    terrain: Terrain
    slope_deg: float | None = None
    stair_height: float | None = None
    tread_length: float | None = None
    edge_distance: float | None = None
    ground: Plane | None = None
    planes: tuple[Plane, ...] = ()
    obstacles: tuple[ObstacleBox, ...] = ()
    foothold: PlanarPose | None = None


@dataclass(frozen=True)
class MlesacParams:
    sigma_in: float = 0.005
    n_hypotheses: int = 500
    em_iters: int = 5
    min_inliers: int = 100
    min_extent: float = 0.35
    traversable_nz: float = 0.7
    max_planes: int = 6
    score_subset: int = 2000


@dataclass(frozen=True)
class ClusterParams:
    radius: float = 0.03
    min_points: int = 20
    max_height: float = 0.45
    max_length: float = 0.6
    reach: float = 1.6


@dataclass(frozen=True)
class FootholdParams:
    mean_step_length: float = 0.5
    sigma: float = 0.05
    inflation: float = 0.05
    grid: float = 0.01
    x_min: float = 0.05


def _sample_rect(rng, n, x_range, y_range, z_fn):
    x = rng.uniform(x_range[0], x_range[1], n)
    y = rng.uniform(y_range[0], y_range[1], n)
    return np.column_stack([x, y, z_fn(x)])


def _sample_vertical_x(rng, n, x, y_range, z_range):
    y = rng.uniform(y_range[0], y_range[1], n)
    z = rng.uniform(z_range[0], z_range[1], n)
    return np.column_stack([np.full(n, x), y, z])


def _sample_vertical_y(rng, n, x_range, y, z_range):
    x = rng.uniform(x_range[0], x_range[1], n)
    z = rng.uniform(z_range[0], z_range[1], n)
    return np.column_stack([x, np.full(n, y), z])


def scene_profile(scene: Scene):
    """Ground height z(x) on the sagittal line for a scene description."""
    terrain = scene.terrain
    if terrain is Terrain.FLAT:
        return lambda x: np.zeros_like(np.asarray(x, float))
    if terrain in (Terrain.SLOPE_UP, Terrain.SLOPE_DOWN):
        slope = math.tan(math.radians(scene.slope_deg))
        if terrain is Terrain.SLOPE_DOWN:
            slope = -slope
        return lambda x: slope * np.asarray(x, float)
    sign = 1.0 if terrain is Terrain.STAIRS_UP else -1.0

    def stairs(x):
        x = np.asarray(x, float)
        k = np.ceil((x - scene.edge_distance) / scene.tread_length)
        k = np.clip(k, 0, None)
        return sign * scene.stair_height * k

    return stairs


def synthesize_cloud(scene: Scene, density: float, seed: int) -> PointCloud:
    """Sample the scene surfaces at ``density`` points/m^2 with noise and outliers.

    Point counts per surface are Poisson draws; outliers are uniform over
    the inflated bounding box of the surface samples.  Deterministic given
    the seed.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    rng = np.random.default_rng(seed)
    x0, x1 = scene.span
    w = scene.width / 2.0
    chunks = []

    def rect(xa, xb, z_fn, area_scale=1.0):
        if xb <= xa:
            return
        area = (xb - xa) * scene.width * area_scale
        n = rng.poisson(density * area)
        if n:
            chunks.append(_sample_rect(rng, n, (xa, xb), (-w, w), z_fn))

    terrain = scene.terrain
    if terrain is Terrain.FLAT:
        rect(x0, x1, lambda x: np.zeros_like(x))
    elif terrain in (Terrain.SLOPE_UP, Terrain.SLOPE_DOWN):
        profile = scene_profile(scene)
        beta = math.radians(scene.slope_deg)
        rect(x0, x1, profile, area_scale=1.0 / math.cos(beta))
    else:
        profile = scene_profile(scene)
        sign = 1.0 if terrain is Terrain.STAIRS_UP else -1.0
        rect(x0, scene.edge_distance, lambda x: np.zeros_like(x))
        k = 1
        x = scene.edge_distance
        while x < x1 and k <= 4:
            xa, xb = x, min(x + scene.tread_length, x1)
            level = sign * scene.stair_height * k
            rect(xa, xb, lambda x_, level=level: np.full_like(x_, level))
            if terrain is Terrain.STAIRS_UP:
                # risers face the camera on the way up
                area = scene.stair_height * scene.width
                n = rng.poisson(density * area)
                if n:
                    chunks.append(
                        _sample_vertical_x(
                            rng, n, xa, (-w, w), (level - scene.stair_height, level)
                        )
                    )
            x = xb
            k += 1

    profile = scene_profile(scene)
    for box in scene.obstacles:
        base = float(profile(np.array([box.x_start]))[0])
        top = base + box.height
        half = box.length / 2.0
        n_top = rng.poisson(density * box.length * box.length)
        if n_top:
            chunks.append(
                _sample_rect(
                    rng, n_top, (box.x_start, box.x_end), (-half, half),
                    lambda x: np.full_like(x, top),
                )
            )
        for x_face in (box.x_start, box.x_end):
            n_face = rng.poisson(density * box.length * box.height)
            if n_face:
                chunks.append(
                    _sample_vertical_x(rng, n_face, x_face, (-half, half), (base, top))
                )
        for y_face in (-half, half):
            n_side = rng.poisson(density * box.length * box.height)
            if n_side:
                chunks.append(
                    _sample_vertical_y(rng, n_side, (box.x_start, box.x_end), y_face, (base, top))
                )

    surface = np.vstack(chunks) if chunks else np.zeros((0, 3))
    if scene.noise_sigma > 0 and len(surface):
        surface = surface + rng.normal(0.0, scene.noise_sigma, surface.shape)
    if scene.outlier_fraction > 0 and len(surface):
        n_out = int(round(scene.outlier_fraction / (1.0 - scene.outlier_fraction) * len(surface)))
        lo = surface.min(axis=0) - 0.25
        hi = surface.max(axis=0) + 0.25
        outliers = rng.uniform(lo, hi, (n_out, 3))
        surface = np.vstack([surface, outliers])
    return PointCloud(surface)


def _fit_plane_lsq(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares plane through points: smallest principal direction."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    if normal[2] < 0:
        normal = -normal
    return normal, float(normal @ centroid)


def mlesac_plane(
    cloud: PointCloud, params: MlesacParams = MlesacParams(), seed: int = 0, rng=None
) -> Plane:
    """Best plane under a Gaussian-inlier / uniform-outlier mixture likelihood.

    Each 3-point hypothesis is scored by the data likelihood with the
    mixing weight re-estimated by a short EM; the winner is refined by a
    least-squares fit to its inliers (|error| < 3 sigma).
    """
    pts = cloud.points
    n = len(pts)
    if n < max(3, params.min_inliers):
        raise NoPlaneFound(f"cloud has only {n} points")
    rng = np.random.default_rng(seed) if rng is None else rng

    # hypothesis normals from random point triples
    idx = rng.integers(0, n, size=(params.n_hypotheses, 3))
    p0, p1, p2 = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    ok = norms > 1e-12
    if not ok.any():
        raise NoPlaneFound("all hypotheses degenerate")
    normals = normals[ok] / norms[ok, None]
    offsets = np.einsum("hk,hk->h", normals, p0[ok])

    score_pts = pts
    if n > params.score_subset:
        score_pts = pts[rng.choice(n, params.score_subset, replace=False)]
    errors = np.abs(normals @ score_pts.T - offsets[:, None])  # (H, ns)

    span = float(np.max(score_pts.max(axis=0) - score_pts.min(axis=0)))
    uniform_density = 1.0 / max(span, 1e-6)
    sigma = params.sigma_in
    gauss = np.exp(-0.5 * (errors / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma)
    gamma = np.full(normals.shape[0], 0.5)
    for _ in range(params.em_iters):
        num = gamma[:, None] * gauss
        z = num / (num + (1 - gamma)[:, None] * uniform_density)
        gamma = z.mean(axis=1)
    scores = np.log(gamma[:, None] * gauss + (1 - gamma)[:, None] * uniform_density).sum(axis=1)
    best = int(np.argmax(scores))

    normal, offset = normals[best], offsets[best]
    for _ in range(2):
        err = np.abs(pts @ normal - offset)
        mask = err < 3.0 * sigma
        if mask.sum() < 3:
            break
        normal, offset = _fit_plane_lsq(pts[mask])
    err = np.abs(pts @ normal - offset)
    mask = err < 3.0 * sigma
    if mask.sum() < params.min_inliers:
        raise NoPlaneFound(
            f"best plane supports only {int(mask.sum())} inliers "
            f"(need {params.min_inliers})"
        )
    return Plane(normal, offset, pts[mask])


def _plane_extent(plane: Plane) -> float:
    """Largest robust horizontal span of the inliers, meters."""
    xs = plane.inliers[:, 0]
    ys = plane.inliers[:, 1]
    ext_x = np.percentile(xs, 99.5) - np.percentile(xs, 0.5)
    ext_y = np.percentile(ys, 99.5) - np.percentile(ys, 0.5)
    return float(max(ext_x, ext_y))


def segment_planes(
    cloud: PointCloud, params: MlesacParams = MlesacParams(), seed: int = 0
) -> tuple[list[Plane], np.ndarray]:
    """Iteratively extract planes, keeping only traversable ones.

    Keeps planes with |n_z| above the traversability threshold and enough
    spatial extent.  Returns the kept planes and the residual points
    (never-fitted points plus inliers of rejected planes) for clustering.
    """
    rng = np.random.default_rng(seed)
    remaining = cloud.points
    kept: list[Plane] = []
    rejected_points = []
    for _ in range(params.max_planes):
        if len(remaining) < params.min_inliers:
            break
        try:
            plane = mlesac_plane(PointCloud(remaining), params, rng=rng)
        except NoPlaneFound:
            break
        err = np.abs(remaining @ plane.normal - plane.offset)
        mask = err < 3.0 * params.sigma_in
        remaining = remaining[~mask]
        traversable = abs(plane.normal[2]) > params.traversable_nz
        if traversable and _plane_extent(plane) >= params.min_extent:
            kept.append(plane)
        else:
            rejected_points.append(plane.inliers)
    residual = np.vstack([remaining] + rejected_points) if rejected_points else remaining
    return kept, residual


HORIZONTAL_TILT_DEG = 10.0
SLOPE_TILT_MAX_DEG = 35.0
STAIR_MIN_OFFSET = 0.03


def _robust_min(v: np.ndarray) -> float:
    return float(np.percentile(v, 0.5))


def _robust_max(v: np.ndarray) -> float:
    return float(np.percentile(v, 99.5))


def classify_terrain(planes: list[Plane]) -> TerrainReport:
    """Assign flat / stairs / slope from plane orientation and arrangement.

    One horizontal plane means flat ground; several horizontal planes with
    a vertical offset mean stairs (direction from the height of the treads
    ahead); an inclined plane means a slope.  Mixing both raises
    :class:`AmbiguousTerrain`.
    """
    if not planes:
        raise NoPlaneFound("no traversable planes to classify")
    horizontal = [p for p in planes if p.tilt_deg < HORIZONTAL_TILT_DEG]
    inclined = [
        p for p in planes if HORIZONTAL_TILT_DEG <= p.tilt_deg <= SLOPE_TILT_MAX_DEG
    ]

    levels = sorted(float(p.offset / p.normal[2]) for p in horizontal)
    stair_like = (
        len(horizontal) >= 2
        and max(levels) - min(levels) >= STAIR_MIN_OFFSET
    )
    if inclined and stair_like:
        raise AmbiguousTerrain("scene shows both an inclined plane and stair-like offsets")

    if inclined:
        # steepest inclined plane defines the slope
        slope_plane = max(inclined, key=lambda p: p.tilt_deg)
        going_up = slope_plane.normal[0] < 0
        return TerrainReport(
            terrain=Terrain.SLOPE_UP if going_up else Terrain.SLOPE_DOWN,
            slope_deg=slope_plane.tilt_deg,
            ground=slope_plane,
            planes=tuple(planes),
        )

    if not horizontal:
        raise NoPlaneFound("no horizontal or inclined traversable plane")

    # ground plane: closest to the feet (origin)
    ground = min(horizontal, key=lambda p: abs(p.offset))
    ground_z = float(ground.offset / ground.normal[2])
    if not stair_like:
        return TerrainReport(terrain=Terrain.FLAT, ground=ground, planes=tuple(planes))

    others = [p for p in horizontal if p is not ground]
    # first tread ahead of the foot = smallest robust starting x
    def start_x(p: Plane) -> float:
        return _robust_min(p.inliers[:, 0])

    first = min(others, key=start_x)
    first_z = float(first.offset / first.normal[2])
    gaps = np.diff(sorted(levels))
    big = gaps[gaps >= STAIR_MIN_OFFSET]
    stair_height = float(np.mean(big)) if big.size else float(max(levels) - min(levels))
    ascending = first_z > ground_z
    tread_length = _robust_max(first.inliers[:, 0]) - _robust_min(first.inliers[:, 0])
    edge = start_x(first)
    return TerrainReport(
        terrain=Terrain.STAIRS_UP if ascending else Terrain.STAIRS_DOWN,
        stair_height=stair_height,
        tread_length=float(tread_length),
        edge_distance=float(edge),
        ground=ground,
        planes=tuple(planes),
    )


def cluster_obstacles(
    residual: np.ndarray,
    planes: list[Plane],
    params: ClusterParams = ClusterParams(),
) -> list[ObstacleBox]:
    """Single-linkage Euclidean clustering of off-plane points into boxes.

    Sparse or far-away clusters are treated as noise.  Box extents use
    trimmed percentiles so stray merged outliers cannot stretch them.
    """
    pts = np.asarray(residual, float).reshape(-1, 3)
    if len(pts) < params.min_points:
        return []
    tree = cKDTree(pts)
    pairs = tree.query_pairs(params.radius, output_type="ndarray")
    graph = sparse.coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(pts), len(pts))
    )
    n_comp, labels = sparse.csgraph.connected_components(graph, directed=False)

    boxes = []
    for c in range(n_comp):
        cluster = pts[labels == c]
        if len(cluster) < params.min_points:
            continue
        x_lo, x_hi = np.percentile(cluster[:, 0], [1.0, 99.0])
        core = cluster[(cluster[:, 0] >= x_lo - 0.01) & (cluster[:, 0] <= x_hi + 0.01)]
        x_lo, x_hi = np.percentile(core[:, 0], [0.5, 99.5])
        z_hi = np.percentile(core[:, 2], 99.5)
        center_x = 0.5 * (x_lo + x_hi)
        if not 0.0 <= center_x <= params.reach:
            continue
        ground_z = _ground_under(planes, center_x, float(np.percentile(core[:, 2], 0.5)))
        length = float(x_hi - x_lo)
        height = float(z_hi - ground_z)
        if length <= 0.005 or height <= 0.005:
            continue
        if height > params.max_height or length > params.max_length:
            continue
        boxes.append(ObstacleBox(float(x_lo), length, height))
    boxes.sort(key=lambda b: b.x_start)
    return boxes


def _ground_under(planes: list[Plane], x: float, cluster_bottom: float) -> float:
    """Height of the supporting plane beneath forward distance x."""
    candidates = []
    for plane in planes:
        z = plane.height_at(x)
        if math.isnan(z) or z > cluster_bottom + 0.02:
            continue
        xs = plane.inliers[:, 0]
        if _robust_min(xs) - 0.05 <= x <= _robust_max(xs) + 0.05:
            candidates.append(z)
    return max(candidates) if candidates else 0.0


def ground_profile(report: TerrainReport):
    """Ground height y(x) on the sagittal line implied by a terrain report."""
    base = 0.0
    if report.ground is not None:
        base = float(report.ground.offset / report.ground.normal[2])
    terrain = report.terrain
    if terrain is Terrain.FLAT:
        return lambda x: base + np.zeros_like(np.asarray(x, float))
    if terrain in (Terrain.SLOPE_UP, Terrain.SLOPE_DOWN):
        slope = math.tan(math.radians(report.slope_deg))
        if terrain is Terrain.SLOPE_DOWN:
            slope = -slope
        return lambda x: base + slope * np.asarray(x, float)
    sign = 1.0 if terrain is Terrain.STAIRS_UP else -1.0
    height = report.stair_height
    tread = report.tread_length or 0.3
    edge = report.edge_distance if report.edge_distance is not None else 0.25

    def stairs(x):
        x = np.asarray(x, float)
        k = np.ceil((x - edge) / tread)
        k = np.clip(k, 0, None)
        return base + sign * height * k

    return stairs


def slope_contact_lift(model: ExoModel, slope_deg: float | None) -> float:
    """Height of the ankle-projection point above a ramp for a flat-set foot.

    The sole touches the ramp at perpendicular distance ``l3`` below the
    ankle, so the ankle's vertical projection clears the surface by
    ``l3 (1/cos(beta) - 1)``; zero on level ground.
    """
    if not slope_deg:
        return 0.0
    beta = math.radians(abs(slope_deg))
    return model.l3 * (1.0 / math.cos(beta) - 1.0)


def select_foothold(
    report: TerrainReport, model: ExoModel, params: FootholdParams = FootholdParams()
) -> PlanarPose:
    """Best landing window ahead of the foot.

    Grid cells score a step-length prior times a binary occupancy term that
    zeroes inflated obstacle footprints and terrain discontinuities.  A
    window the size of the foot slides over the grid; blocked windows score
    zero.  The returned pose is where the ankle-projection point rests:
    the winner's ankle abscissa and the ground height there, lifted by the
    ramp contact offset on slopes.
    """
    profile = ground_profile(report)
    x_max = min(model.max_step_length, params.mean_step_length + 4 * params.sigma + 0.2)
    grid = np.arange(params.x_min, x_max + params.grid / 2, params.grid)
    if grid.size < 2:
        raise NoValidFoothold("empty search area")
    prior = np.exp(-0.5 * ((grid - params.mean_step_length) / params.sigma) ** 2)
    free = np.ones_like(grid, dtype=bool)
    for box in report.obstacles:
        free &= ~(
            (grid >= box.x_start - params.inflation)
            & (grid <= box.x_end + params.inflation)
        )
    if report.terrain in (Terrain.STAIRS_UP, Terrain.STAIRS_DOWN):
        tread = report.tread_length or 0.3
        edge = report.edge_distance if report.edge_distance is not None else 0.25
        k = 0
        while True:
            x_edge = edge + k * tread
            if x_edge > grid[-1] + params.inflation:
                break
            free &= ~(np.abs(grid - x_edge) <= params.inflation)
            k += 1

    window = max(int(round(model.foot_length / params.grid)), 1)
    heel_offset = int(round(model.l4 / params.grid))
    scores = np.zeros(grid.size - window)
    for i in range(scores.size):
        win_free = free[i : i + window]
        if win_free.all():
            scores[i] = prior[i : i + window].mean()
    if not scores.size or scores.max() <= 0.0:
        raise NoValidFoothold("all foothold windows blocked")
    best = int(np.argmax(scores))
    x_ankle = grid[best + heel_offset]
    lift = 0.0
    if report.terrain in (Terrain.SLOPE_UP, Terrain.SLOPE_DOWN):
        lift = slope_contact_lift(model, report.slope_deg)
    return PlanarPose(float(x_ankle), float(profile(np.array([x_ankle]))[0]) + lift)


def perceive(
    cloud: PointCloud,
    model: ExoModel,
    mlesac: MlesacParams = MlesacParams(),
    cluster: ClusterParams = ClusterParams(),
    foothold: FootholdParams = FootholdParams(),
    seed: int = 0,
) -> TerrainReport:
    """Full perception pipeline: planes -> terrain -> obstacles -> foothold."""
    planes, residual = segment_planes(cloud, mlesac, seed)
    report = classify_terrain(planes)
    obstacles = cluster_obstacles(residual, planes, cluster)
    report = replace(report, obstacles=tuple(obstacles))
    pose = select_foothold(report, model, foothold)
    return replace(report, foothold=pose)


def report_from_scene(
    scene: Scene,
    model: ExoModel,
    foothold: FootholdParams = FootholdParams(),
) -> TerrainReport:
    """Ground-truth terrain report for a scene, bypassing perception."""
    report = TerrainReport(
        terrain=scene.terrain,
        slope_deg=scene.slope_deg if scene.terrain in (Terrain.SLOPE_UP, Terrain.SLOPE_DOWN) else None,
        stair_height=scene.stair_height if scene.terrain in (Terrain.STAIRS_UP, Terrain.STAIRS_DOWN) else None,
        tread_length=scene.tread_length if scene.terrain in (Terrain.STAIRS_UP, Terrain.STAIRS_DOWN) else None,
        edge_distance=scene.edge_distance if scene.terrain in (Terrain.STAIRS_UP, Terrain.STAIRS_DOWN) else None,
        obstacles=scene.obstacles,
    )
    pose = select_foothold(report, model, foothold)
    return replace(report, foothold=pose)
