"""Multi-terrain exoskeleton gait planning from human demonstrations.

Pipeline: probabilistic gait models learned from demonstrated steps
(mixture regression over phase), kernel-based trajectory prediction with
via-points and per-phase linear constraints solved as a nonnegative dual
QP, local start/goal frames fused by precision weighting, and a synthetic
perception front end (plane segmentation, terrain classification, obstacle
clustering, foothold selection).
"""

from .config import GaitDefaults, ModelHyper, RunConfig
from .environment import (
    ObstacleBox,
    Plane,
    PointCloud,
    Scene,
    Terrain,
    TerrainReport,
    classify_terrain,
    cluster_obstacles,
    mlesac_plane,
    perceive,
    report_from_scene,
    segment_planes,
    select_foothold,
    synthesize_cloud,
)
from .errors import ExogaitError
from .kinematics import (
    ExoModel,
    LegAngles,
    PlanarPose,
    com_from_support,
    foot_contact_points,
    foot_from_com,
    leg_ik,
)
from .kmp import (
    KmpModel,
    LocalFrame,
    TrajectoryDistribution,
    ViaPoint,
    fuse_local_trajectories,
    kmp_predict,
    kmp_predict_cov,
    kmp_predict_mean,
    project_database,
    set_step_height_via,
    update_via_points,
)
from .lckmp import (
    ConstraintSet,
    PhaseConstraint,
    QpSolution,
    assemble_constraints,
    predict_constrained,
    solve_dual_qp,
)
from .learning import (
    Demonstration,
    Gmm,
    ReferenceDatabase,
    build_reference_database,
    fit_gmm,
    gmr,
)
from .planner import (
    FinalConfiguration,
    GaitPlan,
    StepKind,
    StepRequest,
    boundary_constraints,
    final_configuration,
    obstacle_constraints,
    plan_step,
    standing_start,
    steady_start,
)

__version__ = "0.1.0"
