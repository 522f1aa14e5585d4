"""Probabilistic gait learning: mixture fitting over (phase, output) samples
and regression of a per-phase Gaussian reference trajectory.

Each demonstrated step is a sequence of (phase, 2-D output) pairs, the phase
being step time rescaled to [0, 1] so the model is independent of step
duration.  A Gaussian mixture is fitted to the pooled samples of all
demonstrations; conditioning it on the phase yields a Gaussian at every
query phase.  Sampling those conditionals at N uniform phases produces the
reference database consumed by the trajectory models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateComponent, TooFewPoints

__all__ = [
    "Demonstration",
    "Gmm",
    "ReferenceDatabase",
    "fit_gmm",
    "gmr",
    "gmr_many",
    "build_reference_database",
]

COV_FLOOR = 1e-8


@dataclass(frozen=True)
class Demonstration:
    """One demonstrated step: strictly increasing phases and 2-D outputs."""

    step_id: int
    s: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, float)
        xi = np.asarray(self.xi, float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "xi", xi)
        if s.ndim != 1 or xi.shape != (s.size, 2):
            raise ValueError("demonstration needs s (n,) and xi (n, 2)")
        if s.size < 2:
            raise ValueError("demonstration needs at least two samples")
        if np.any(np.diff(s) <= 0):
            raise ValueError("phases must be strictly increasing")

    def normalized(self) -> "Demonstration":
        """Rescale phases to span exactly [0, 1]."""
        s = (self.s - self.s[0]) / (self.s[-1] - self.s[0])
        return Demonstration(self.step_id, s, self.xi)

    def resampled(self, n_points: int) -> "Demonstration":
        """Linear interpolation onto ``n_points`` uniform phases in [0, 1]."""
        demo = self.normalized()
        grid = np.linspace(0.0, 1.0, n_points)
        xi = np.column_stack(
            [np.interp(grid, demo.s, demo.xi[:, k]) for k in range(2)]
        )
        return Demonstration(self.step_id, grid, xi)


@dataclass(frozen=True)
class Gmm:
    """Gaussian mixture over stacked (phase, output) vectors."""

    weights: np.ndarray  # (C,)
    means: np.ndarray  # (C, D)
    covs: np.ndarray  # (C, D, D)
    log_likelihood_trace: tuple = field(default=(), compare=False)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class ReferenceDatabase:
    """Per-phase Gaussians of the reference trajectory: (s_n, mu_n, cov_n)."""

    s: np.ndarray  # (N,)
    mu: np.ndarray  # (N, 2)
    cov: np.ndarray  # (N, 2, 2)

    def __post_init__(self):
        s = np.asarray(self.s, float)
        mu = np.asarray(self.mu, float)
        cov = np.asarray(self.cov, float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)
        if s.ndim != 1 or mu.shape != (s.size, 2) or cov.shape != (s.size, 2, 2):
            raise ValueError("inconsistent database shapes")
        if np.any(np.diff(s) <= 0):
            raise ValueError("phases must be strictly increasing")
        dets = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] * cov[:, 1, 0]
        if np.any(cov[:, 0, 0] <= 0) or np.any(dets <= 0):
            raise ValueError("every covariance must be positive-definite")

    @property
    def n(self) -> int:
        return self.s.size


def _log_gauss(points, mean, cov):
    """Log density of ``points`` (n, D) under one Gaussian; Cholesky based."""
    d = points.shape[1]
    chol = np.linalg.cholesky(cov)
    diff = (points - mean) @ np.linalg.inv(chol).T
    maha = np.sum(diff**2, axis=1)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))


def _kmeanspp(points, k, rng):
    """Seeded k-means++ centers followed by a few Lloyd iterations."""
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    centers = np.array(centers)
    for _ in range(10):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        for c in range(k):
            mask = labels == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
    return centers, labels


def fit_gmm(
    points,
    n_components: int,
    seed: int,
    max_iter: int = 200,
    tol: float = 1e-8,
    cov_floor: float = COV_FLOOR,
) -> Gmm:
    """EM fit of a ``n_components`` mixture; deterministic given ``seed``.

    Every M-step covariance is symmetrized and floored with
    ``cov_floor * I`` so downstream conditionals stay invertible.  The
    log-likelihood trace is kept on the returned model; it is non-decreasing
    up to numerical slack.
    """
    points = np.asarray(points, float)
    if points.ndim != 2:
        raise ValueError("points must be (n, D)")
    n, d = points.shape
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if n < 3 * n_components:
        raise TooFewPoints(
            f"{n} samples cannot support {n_components} components (need >= {3 * n_components})"
        )
    rng = np.random.default_rng(seed)

    if n_components == 1:
        labels = np.zeros(n, dtype=int)
        centers = points.mean(axis=0, keepdims=True)
    else:
        centers, labels = _kmeanspp(points, n_components, rng)

    weights = np.empty(n_components)
    means = np.array(centers, float)
    covs = np.empty((n_components, d, d))
    for c in range(n_components):
        mask = labels == c
        weights[c] = max(mask.sum(), 1.0) / n
        sub = points[mask] if mask.any() else points
        diff = sub - sub.mean(axis=0)
        covs[c] = diff.T @ diff / max(len(sub), 1) + cov_floor * np.eye(d)
    weights /= weights.sum()

    trace = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E-step in the log domain
        logp = np.column_stack(
            [
                np.log(weights[c]) + _log_gauss(points, means[c], covs[c])
                for c in range(n_components)
            ]
        )
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        trace.append(ll)
        resp = np.exp(logp - norm[:, None])

        # M-step
        mass = resp.sum(axis=0)
        empty = mass < 1e-10
        if empty.any():
            # deterministic reboot: move dead components to the worst-fit point
            for c in np.flatnonzero(empty):
                far = int(np.argmin(norm))
                means[c] = points[far]
                covs[c] = np.cov(points.T) + cov_floor * np.eye(d)
                resp[:, c] = 1.0 / n
            mass = resp.sum(axis=0)
            if np.any(mass < 1e-10):
                raise DegenerateComponent("component mass vanished after reboot")
        weights = mass / mass.sum()
        means = (resp.T @ points) / mass[:, None]
        for c in range(n_components):
            diff = points - means[c]
            cov = (resp[:, c, None] * diff).T @ diff / mass[c]
            cov = 0.5 * (cov + cov.T) + cov_floor * np.eye(d)
            covs[c] = cov
            eig_min = np.min(np.linalg.eigvalsh(cov))
            if eig_min < 0.5 * cov_floor:
                raise DegenerateComponent(
                    f"component {c} covariance collapsed (min eig {eig_min:.3g})"
                )

        if ll - prev_ll < tol * abs(ll) and np.isfinite(prev_ll):
            break
        prev_ll = ll

    return Gmm(weights, means, covs, log_likelihood_trace=tuple(trace))


def _conditionals(gmm: Gmm):
    """Per-component terms of the conditional of the output given the phase."""
    mu_s = gmm.means[:, 0]
    mu_x = gmm.means[:, 1:]
    s_ss = gmm.covs[:, 0, 0]
    s_xs = gmm.covs[:, 1:, 0]
    s_xx = gmm.covs[:, 1:, 1:]
    gain = s_xs / s_ss[:, None]  # (C, 2)
    cond_cov = s_xx - gain[:, :, None] * s_xs[:, None, :]
    return mu_s, mu_x, s_ss, gain, cond_cov


def gmr_many(gmm: Gmm, phases, cov_floor: float = COV_FLOOR):
    """Conditional mean and covariance of the output at each phase.

    Standard mixture conditioning: per-component linear-Gaussian
    conditionals combined with responsibilities evaluated at the phase,
    with moment matching for the overall covariance.
    """
    s = np.atleast_1d(np.asarray(phases, float))
    mu_s, mu_x, s_ss, gain, cond_cov = _conditionals(gmm)
    logw = (
        np.log(gmm.weights)[None, :]
        - 0.5 * np.log(2.0 * np.pi * s_ss)[None, :]
        - 0.5 * (s[:, None] - mu_s[None, :]) ** 2 / s_ss[None, :]
    )
    w = np.exp(logw - logsumexp(logw, axis=1)[:, None])  # (Q, C)
    cond_mean = mu_x[None, :, :] + gain[None, :, :] * (
        s[:, None, None] - mu_s[None, :, None]
    )  # (Q, C, 2)
    mean = np.einsum("qc,qcd->qd", w, cond_mean)
    centered = cond_mean - mean[:, None, :]
    cov = np.einsum("qc,cde->qde", w, cond_cov) + np.einsum(
        "qc,qcd,qce->qde", w, centered, centered
    )
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2)) + cov_floor * np.eye(2)
    return mean, cov


def gmr(gmm: Gmm, phase: float, cov_floor: float = COV_FLOOR):
    """Single-phase conditional; returns ``(mean (2,), cov (2, 2))``."""
    mean, cov = gmr_many(gmm, [phase], cov_floor=cov_floor)
    return mean[0], cov[0]


def build_reference_database(
    demos: list[Demonstration],
    n_components: int,
    n_points: int,
    seed: int,
    cov_floor: float = COV_FLOOR,
    return_gmm: bool = False,
):
    """Fit the pooled mixture and read the reference out at uniform phases."""
    if len(demos) < 2:
        raise TooFewPoints("at least two demonstrations are required")
    pooled = []
    for demo in demos:
        r = demo.resampled(n_points)
        pooled.append(np.column_stack([r.s, r.xi]))
    points = np.vstack(pooled)
    gmm = fit_gmm(points, n_components, seed, cov_floor=cov_floor)
    grid = np.linspace(0.0, 1.0, n_points)
    mu, cov = gmr_many(gmm, grid, cov_floor=cov_floor)
    db = ReferenceDatabase(grid, mu, cov)
    return (db, gmm) if return_gmm else db
