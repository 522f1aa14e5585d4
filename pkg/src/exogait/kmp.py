"""Kernel trajectory model: nonparametric imitation of a probabilistic
reference with closed-form mean/covariance prediction, local-frame
projection and precision-weighted fusion, and via-point surgery on the
reference database.

The model never materializes basis functions or weight-space moments; all
predictions go through the Gaussian kernel over phases and regularized
solves against the stacked reference covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    DuplicateVia,
    HeightExceedsLimit,
    SingularCovariance,
    SingularSystem,
)
from .learning import ReferenceDatabase

__all__ = [
    "LocalFrame",
    "ViaPoint",
    "TrajectoryDistribution",
    "KmpModel",
    "phase_kernel",
    "kernel_row",
    "kernel_gram",
    "kmp_predict_mean",
    "kmp_predict_cov",
    "kmp_predict",
    "project_database",
    "unproject_database",
    "project_via",
    "update_via_points",
    "set_step_height_via",
    "fuse_local_trajectories",
]

VIA_COV = 1e-7
COV_PRED_FLOOR = 1e-10


@dataclass(frozen=True)
class LocalFrame:
    """Rigid frame relative to the base: output = rotation @ local + translation.

    In this planner all frames share the base orientation, so ``rotation``
    is the identity; the general form is kept for tests.
    """

    translation: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        t = np.asarray(self.translation, float).reshape(2)
        r = np.asarray(self.rotation, float).reshape(2, 2)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)
        if not np.allclose(r @ r.T, np.eye(2), atol=1e-10):
            raise ValueError("rotation must be orthonormal")


@dataclass(frozen=True)
class ViaPoint:
    """Desired passage point: tight covariance forces the trajectory through it."""

    phase: float
    mean: np.ndarray
    cov: np.ndarray = field(default_factory=lambda: VIA_COV * np.eye(2))

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, float).reshape(2))
        object.__setattr__(self, "cov", np.asarray(self.cov, float).reshape(2, 2))
        if not 0.0 <= self.phase <= 1.0:
            raise ValueError("via phase must lie in [0, 1]")
        det = np.linalg.det(self.cov)
        if det <= 0 or self.cov[0, 0] <= 0:
            raise ValueError("via covariance must be positive-definite")


@dataclass(frozen=True)
class TrajectoryDistribution:
    """Predicted trajectory: per-phase mean and (optional) covariance."""

    phases: np.ndarray
    means: np.ndarray
    covs: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.phases, float)
        m = np.asarray(self.means, float)
        object.__setattr__(self, "phases", p)
        object.__setattr__(self, "means", m)
        if m.shape != (p.size, 2):
            raise ValueError("means must be (Q, 2)")
        if self.covs is not None:
            c = np.asarray(self.covs, float)
            object.__setattr__(self, "covs", c)
            if c.shape != (p.size, 2, 2):
                raise ValueError("covs must be (Q, 2, 2)")


def phase_kernel(s_i, s_j, decay: float):
    """Gaussian phase kernel exp(-decay * (s_i - s_j)^2); 1 at zero distance."""
    if decay <= 0:
        raise ValueError("kernel decay must be positive")
    si = np.asarray(s_i, float)
    sj = np.asarray(s_j, float)
    return np.exp(-decay * (si - sj) ** 2)


def kernel_row(s_star: float, phases, decay: float) -> np.ndarray:
    """Block row [k(s*, s_1) I2 ... k(s*, s_N) I2], shape (2, 2N)."""
    phases = np.asarray(phases, float)
    k = phase_kernel(s_star, phases, decay)
    row = np.zeros((2, 2 * phases.size))
    row[0, 0::2] = k
    row[1, 1::2] = k
    return row


def kernel_gram(phases, decay: float) -> np.ndarray:
    """Block kernel matrix over the database phases, shape (2N, 2N)."""
    phases = np.asarray(phases, float)
    k = phase_kernel(phases[:, None], phases[None, :], decay)
    return np.kron(k, np.eye(2))


@dataclass(frozen=True)
class KmpModel:
    """Reference database plus kernel/regularization settings and cached Gram.

    ``mean_reg`` scales the reference covariance in the mean solve;
    ``cov_reg`` plays the same role in the covariance solve.  Immutable:
    database edits produce new models.
    """

    db: ReferenceDatabase
    kernel_decay: float
    mean_reg: float
    cov_reg: float
    gram: np.ndarray = None

    def __post_init__(self):
        if min(self.kernel_decay, self.mean_reg, self.cov_reg) <= 0:
            raise ValueError("kernel_decay, mean_reg and cov_reg must be positive")
        if self.gram is None:
            object.__setattr__(self, "gram", kernel_gram(self.db.s, self.kernel_decay))

    @classmethod
    def from_database(
        cls, db: ReferenceDatabase, kernel_decay: float, mean_reg: float, cov_reg: float
    ) -> "KmpModel":
        return cls(db, kernel_decay, mean_reg, cov_reg)

    def with_database(self, db: ReferenceDatabase) -> "KmpModel":
        gram = self.gram if np.array_equal(db.s, self.db.s) else None
        return KmpModel(db, self.kernel_decay, self.mean_reg, self.cov_reg, gram)

    @property
    def stacked_mean(self) -> np.ndarray:
        return self.db.mu.reshape(-1)

    @property
    def stacked_cov(self) -> np.ndarray:
        n = self.db.n
        out = np.zeros((2 * n, 2 * n))
        for i in range(n):
            out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = self.db.cov[i]
        return out


def _factor(matrix: np.ndarray, jitter: float = 1e-10):
    """Cholesky with one jittered retry; raises SingularSystem on failure."""
    try:
        return cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError:
        try:
            return cho_factor(matrix + jitter * np.eye(matrix.shape[0]), lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem("regularized kernel system is singular") from exc


def _scalar_kernel_to_queries(model: KmpModel, queries) -> np.ndarray:
    q = np.atleast_1d(np.asarray(queries, float))
    return phase_kernel(q[:, None], model.db.s[None, :], model.kernel_decay)


def mean_weights(model: KmpModel) -> np.ndarray:
    """Solution of (K + mean_reg * Sigma) w = stacked mean, reshaped (N, 2)."""
    system = model.gram + model.mean_reg * model.stacked_cov
    factor = _factor(system)
    return cho_solve(factor, model.stacked_mean).reshape(-1, 2)


def kmp_predict_mean(model: KmpModel, queries) -> TrajectoryDistribution:
    """Mean prediction at the query phases (no covariances)."""
    q = np.atleast_1d(np.asarray(queries, float))
    kq = _scalar_kernel_to_queries(model, q)
    means = kq @ mean_weights(model)
    return TrajectoryDistribution(q, means)


def _floor_spd_2x2(covs: np.ndarray, floor: float) -> np.ndarray:
    """Symmetrize and lift the smallest eigenvalue of each 2x2 to >= floor."""
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    a = covs[..., 0, 0]
    b = covs[..., 0, 1]
    d = covs[..., 1, 1]
    half_tr = 0.5 * (a + d)
    rad = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b**2, 0.0))
    lift = np.maximum(floor - (half_tr - rad), 0.0)
    return covs + lift[..., None, None] * np.eye(2)


def kmp_predict_cov(model: KmpModel, queries, floor: float = COV_PRED_FLOOR) -> np.ndarray:
    """Predictive covariance (N / cov_reg) [k(s*,s*) I - k* (K + cov_reg Sigma)^-1 k*^T]."""
    q = np.atleast_1d(np.asarray(queries, float))
    n = model.db.n
    system = model.gram + model.cov_reg * model.stacked_cov
    factor = _factor(system)
    rows = np.zeros((2 * q.size, 2 * n))
    kq = _scalar_kernel_to_queries(model, q)
    rows[0::2, 0::2] = kq
    rows[1::2, 1::2] = kq
    solved = cho_solve(factor, rows.T)  # (2N, 2Q)
    covs = np.empty((q.size, 2, 2))
    scale = n / model.cov_reg
    for i in range(q.size):
        block = rows[2 * i : 2 * i + 2] @ solved[:, 2 * i : 2 * i + 2]
        covs[i] = scale * (np.eye(2) - block)
    return _floor_spd_2x2(covs, floor)


def kmp_predict(model: KmpModel, queries) -> TrajectoryDistribution:
    """Mean and covariance prediction at the query phases."""
    mean = kmp_predict_mean(model, queries)
    covs = kmp_predict_cov(model, queries)
    return TrajectoryDistribution(mean.phases, mean.means, covs)


def project_database(db: ReferenceDatabase, frame: LocalFrame) -> ReferenceDatabase:
    """Express the database in a local frame: mu -> R^-1 (mu - t); phases unchanged."""
    rot_inv = frame.rotation.T
    mu = (db.mu - frame.translation) @ rot_inv.T
    cov = np.einsum("ab,nbc,dc->nad", rot_inv, db.cov, rot_inv)
    return ReferenceDatabase(db.s.copy(), mu, cov)


def unproject_database(db: ReferenceDatabase, frame: LocalFrame) -> ReferenceDatabase:
    mu = db.mu @ frame.rotation.T + frame.translation
    cov = np.einsum("ab,nbc,dc->nad", frame.rotation, db.cov, frame.rotation)
    return ReferenceDatabase(db.s.copy(), mu, cov)


def project_via(via: ViaPoint, frame: LocalFrame) -> ViaPoint:
    rot_inv = frame.rotation.T
    return ViaPoint(
        via.phase,
        rot_inv @ (via.mean - frame.translation),
        rot_inv @ via.cov @ rot_inv.T,
    )


def update_via_points(
    db: ReferenceDatabase, vias: list[ViaPoint], min_phase_gap: float
) -> ReferenceDatabase:
    """Insert via-points, replacing the nearest entry when phases collide.

    A via closer than ``min_phase_gap`` to an existing phase evicts that
    entry; otherwise it is added alongside.  The result is re-sorted.
    """
    if min_phase_gap <= 0:
        raise ValueError("min_phase_gap must be positive")
    phases = [via.phase for via in vias]
    if np.any(np.diff(phases) < 0):
        raise ValueError("via-points must be sorted by phase")
    if np.any(np.abs(np.diff(phases)) < 1e-12):
        raise DuplicateVia("two via-points share a phase")

    s = list(db.s)
    mu = list(db.mu)
    cov = list(db.cov)
    for via in vias:
        gaps = np.abs(np.asarray(s) - via.phase)
        nearest = int(np.argmin(gaps))
        if gaps[nearest] < min_phase_gap:
            del s[nearest], mu[nearest], cov[nearest]
        s.append(via.phase)
        mu.append(via.mean)
        cov.append(via.cov)
    order = np.argsort(s)
    return ReferenceDatabase(
        np.asarray(s)[order],
        np.asarray(mu)[order],
        np.asarray(cov)[order],
    )


def set_step_height_via(
    db: ReferenceDatabase, step_height: float, max_height: float | None = None
) -> ReferenceDatabase:
    """Pin the swing peak of the reference to ``step_height``.

    The mid-swing entry with the highest mean y is replaced by a tight via
    at the same phase and x, with y set to the requested height.  The first
    and last entries hold the step endpoints and are never the peak, even
    when the terrain rises above the swing apex.
    """
    if max_height is not None and step_height > max_height + 1e-12:
        raise HeightExceedsLimit(
            f"step height {step_height:.3f} m exceeds the limit {max_height:.3f} m"
        )
    interior = slice(1, db.n - 1) if db.n > 2 else slice(0, db.n)
    peak = int(np.argmax(db.mu[interior, 1])) + (1 if db.n > 2 else 0)
    mu = db.mu.copy()
    cov = db.cov.copy()
    mu[peak] = (db.mu[peak, 0], step_height)
    cov[peak] = VIA_COV * np.eye(2)
    return ReferenceDatabase(db.s.copy(), mu, cov)


def _inv_2x2(mats: np.ndarray) -> np.ndarray:
    a = mats[..., 0, 0]
    b = mats[..., 0, 1]
    c = mats[..., 1, 0]
    d = mats[..., 1, 1]
    det = a * d - b * c
    if np.any(np.abs(det) < 1e-250):
        raise SingularCovariance("local covariance not invertible after flooring")
    inv = np.empty_like(mats)
    inv[..., 0, 0] = d
    inv[..., 0, 1] = -b
    inv[..., 1, 0] = -c
    inv[..., 1, 1] = a
    return inv / det[..., None, None]


def fuse_local_trajectories(
    parts: list[tuple[TrajectoryDistribution, LocalFrame]],
) -> TrajectoryDistribution:
    """Precision-weighted product of the per-frame predictions in the base frame.

    Each local mean/covariance is first mapped through its frame, then the
    Gaussians are multiplied: precision matrices add, and the fused mean is
    the precision-weighted average.
    """
    if not parts:
        raise ValueError("need at least one local trajectory")
    phases = parts[0][0].phases
    for traj, _ in parts:
        if traj.covs is None:
            raise ValueError("fusion needs covariances on every trajectory")
        if not np.allclose(traj.phases, phases):
            raise ValueError("trajectories must share query phases")

    precision_sum = np.zeros((phases.size, 2, 2))
    weighted_mean = np.zeros((phases.size, 2))
    for traj, frame in parts:
        mean_g = traj.means @ frame.rotation.T + frame.translation
        cov_g = np.einsum("ab,nbc,dc->nad", frame.rotation, traj.covs, frame.rotation)
        cov_g = _floor_spd_2x2(cov_g, COV_PRED_FLOOR)
        prec = _inv_2x2(cov_g)
        precision_sum += prec
        weighted_mean += np.einsum("nab,nb->na", prec, mean_g)
    fused_cov = _inv_2x2(precision_sum)
    fused_mean = np.einsum("nab,nb->na", fused_cov, weighted_mean)
    return TrajectoryDistribution(phases.copy(), fused_mean, _floor_spd_2x2(fused_cov, 0.0))
