"""Linearly constrained trajectory prediction.

Per-phase inequalities ``direction . xi(s_n) >= bound`` are collected into a
block-diagonal matrix and folded into the kernel model through nonnegative
Lagrange multipliers.  The multipliers solve a concave quadratic dual

    maximize  a^T B1 a + B2 a   subject to  a >= 0

whose terms come from the kernel Gram matrix and the stacked reference
covariance.  The constrained mean is then a single extra term in the usual
kernel solve; covariances are unaffected by the constraints.

Solver: exhaustive active-set enumeration for up to 8 multipliers, else
Jacobi-scaled projected-gradient ascent with Barzilai-Borwein steps and an
active-set polish to push the KKT residual to tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .errors import IndexOutOfRange, NonConcaveObjective, NotConverged
from .kmp import (
    KmpModel,
    TrajectoryDistribution,
    _factor,
    kmp_predict_cov,
    kmp_predict_mean,
    phase_kernel,
)
from .learning import ReferenceDatabase

__all__ = [
    "PhaseConstraint",
    "ConstraintSet",
    "QpSolution",
    "assemble_constraints",
    "solve_dual_qp",
    "predict_constrained",
]

ENUM_LIMIT = 8
KKT_TOL = 1e-8


@dataclass(frozen=True)
class PhaseConstraint:
    """One inequality ``direction . xi(s_index) >= bound`` at a database phase.

    ``index`` is the 0-based position of the phase in the reference database.
    """

    index: int
    direction: np.ndarray
    bound: float

    def __post_init__(self):
        d = np.asarray(self.direction, float).reshape(2)
        object.__setattr__(self, "direction", d)
        if not np.any(d != 0.0):
            raise ValueError("constraint direction must be nonzero")


@dataclass(frozen=True)
class ConstraintSet:
    """Assembled constraints: per-phase lists plus the stacked block matrices."""

    n_phases: int
    constraints: tuple[PhaseConstraint, ...]
    g_bar: np.ndarray  # (2N, m) block diagonal by phase
    c_bar: np.ndarray  # (m,)

    @property
    def size(self) -> int:
        return self.c_bar.size

    def per_phase(self) -> dict[int, list[PhaseConstraint]]:
        out: dict[int, list[PhaseConstraint]] = {}
        for con in self.constraints:
            out.setdefault(con.index, []).append(con)
        return out


def assemble_constraints(
    constraints: list[PhaseConstraint], n_phases: int
) -> ConstraintSet:
    """Order constraints by phase and build the block matrices.

    Phases with no constraints contribute zero-width blocks; the column
    count of the stacked matrix equals the total number of inequalities.
    """
    for con in constraints:
        if not 0 <= con.index < n_phases:
            raise IndexOutOfRange(
                f"constraint phase index {con.index} outside [0, {n_phases - 1}]"
            )
    ordered = sorted(enumerate(constraints), key=lambda ic: (ic[1].index, ic[0]))
    ordered = tuple(con for _, con in ordered)
    m = len(ordered)
    g_bar = np.zeros((2 * n_phases, m))
    c_bar = np.empty(m)
    for j, con in enumerate(ordered):
        g_bar[2 * con.index : 2 * con.index + 2, j] = con.direction
        c_bar[j] = con.bound
    return ConstraintSet(n_phases, ordered, g_bar, c_bar)


@dataclass(frozen=True)
class QpSolution:
    """Optimal multipliers with convergence diagnostics."""

    alpha: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float


def _dual_terms(model: KmpModel, db_local: ReferenceDatabase, cs: ConstraintSet):
    """Quadratic and linear dual terms (B1 symmetrized, B2 as a vector).

    The quadratic-form matrix collapses algebraically to
    -1/2 Sigma (K + reg Sigma)^-1 K, which avoids forming Sigma^-1.
    """
    if db_local.n != model.db.n or not np.allclose(db_local.s, model.db.s):
        raise ValueError("model and local database must share phases")
    if cs.n_phases != model.db.n:
        raise ValueError("constraint set was assembled for a different N")
    sigma = _stacked_cov(db_local)
    mu = db_local.mu.reshape(-1)
    factor = _factor(model.gram + model.mean_reg * sigma)
    m_mat = cho_solve(factor, model.gram)  # (K + reg Sigma)^-1 K
    w = sigma @ m_mat
    b1 = -0.5 * cs.g_bar.T @ w @ cs.g_bar
    asym = np.max(np.abs(b1 - b1.T)) if b1.size else 0.0
    scale = max(1.0, np.max(np.abs(b1))) if b1.size else 1.0
    if asym > 1e-8 * scale:
        raise NonConcaveObjective(f"dual quadratic term asymmetric by {asym:.3g}")
    b1 = 0.5 * (b1 + b1.T)
    b2 = cs.c_bar - (mu @ m_mat) @ cs.g_bar
    if b1.size:
        top = np.max(np.linalg.eigvalsh(b1))
        if top > 1e-8 * scale:
            raise NonConcaveObjective(
                f"dual quadratic term has positive eigenvalue {top:.3g}"
            )
    return b1, b2, factor, sigma, mu


def _stacked_cov(db: ReferenceDatabase) -> np.ndarray:
    out = np.zeros((2 * db.n, 2 * db.n))
    for i in range(db.n):
        out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = db.cov[i]
    return out


def _kkt_residual(b1: np.ndarray, b2: np.ndarray, alpha: np.ndarray) -> float:
    grad = 2.0 * b1 @ alpha + b2
    projected = np.where(alpha > 0, grad, np.maximum(grad, 0.0))
    return float(max(np.max(np.abs(projected), initial=0.0),
                     np.max(np.abs(alpha * grad), initial=0.0)))


def _solve_enumerate(b1: np.ndarray, b2: np.ndarray):
    """Try every active set; keep the best KKT-consistent candidate."""
    m = b2.size
    best = None
    for r in range(m + 1):
        for subset in itertools.combinations(range(m), r):
            alpha = np.zeros(m)
            if subset:
                idx = list(subset)
                sub = -2.0 * b1[np.ix_(idx, idx)]
                try:
                    a_s = np.linalg.solve(sub, b2[idx])
                except np.linalg.LinAlgError:
                    a_s, *_ = np.linalg.lstsq(sub, b2[idx], rcond=None)
                if np.any(a_s < -1e-11):
                    continue
                alpha[idx] = np.maximum(a_s, 0.0)
            grad = 2.0 * b1 @ alpha + b2
            off = [i for i in range(m) if i not in subset]
            if off and np.max(grad[off]) > 1e-9 * max(1.0, np.max(np.abs(b2))):
                continue
            obj = float(alpha @ b1 @ alpha + b2 @ alpha)
            if best is None or obj > best[1]:
                best = (alpha, obj)
    if best is None:  # defensive; alpha = 0 is always KKT-checkable
        best = (np.zeros(m), 0.0)
    return best


def _polish_active_set(b1: np.ndarray, b2: np.ndarray, alpha: np.ndarray):
    """Re-solve the stationarity system on the current support."""
    for _ in range(8):
        active = alpha > 0
        if not active.any():
            break
        idx = np.flatnonzero(active)
        sub = -2.0 * b1[np.ix_(idx, idx)]
        sol, *_ = np.linalg.lstsq(sub, b2[idx], rcond=None)
        if np.any(~np.isfinite(sol)):
            break
        cand = np.zeros_like(alpha)
        cand[idx] = sol
        if np.any(sol < 0):
            # back off along the segment to the feasible boundary
            step = cand - alpha
            bad = step < 0
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(bad, -alpha / step, np.inf)
            t = min(1.0, float(np.min(ratios)))
            alpha = np.maximum(alpha + t * step, 0.0)
            continue
        new_obj = float(cand @ b1 @ cand + b2 @ cand)
        old_obj = float(alpha @ b1 @ alpha + b2 @ alpha)
        if new_obj < old_obj - 1e-12 * max(1.0, abs(old_obj)):
            break
        alpha = cand
        grad = 2.0 * b1 @ alpha + b2
        release = (alpha <= 0) & (grad > 0)
        if not release.any():
            break
        alpha[release] = 1e-16  # admit to the support and iterate
    return alpha


def _solve_pgbb(b1: np.ndarray, b2: np.ndarray, tol: float, max_iter: int):
    """Projected-gradient ascent with Barzilai-Borwein steps, Jacobi scaled."""
    m = b2.size
    diag = np.maximum(-2.0 * np.diag(b1), 1e-300)
    d = np.sqrt(diag)
    b1s = b1 / np.outer(d, d)
    b2s = b2 / d
    lip = max(np.max(np.abs(2.0 * b1s).sum(axis=1)), 1e-12)
    step = 1.0 / lip
    scale = max(1.0, np.max(np.abs(b2s)))

    beta = np.zeros(m)
    grad = b2s.copy()
    iterations = 0
    for it in range(max_iter):
        iterations = it + 1
        new_beta = np.maximum(beta + step * grad, 0.0)
        new_grad = 2.0 * b1s @ new_beta + b2s
        delta_b = new_beta - beta
        delta_g = new_grad - grad
        beta, grad = new_beta, new_grad
        residual = np.max(np.abs(np.maximum(beta + grad, 0.0) - beta), initial=0.0)
        if residual <= tol * scale:
            break
        denom_bb1 = float(delta_b @ delta_g)
        denom_bb2 = float(delta_g @ delta_g)
        if denom_bb1 < 0 and denom_bb2 > 0:
            step = (
                -float(delta_b @ delta_b) / denom_bb1
                if it % 2 == 0
                else -denom_bb1 / denom_bb2
            )
            step = float(np.clip(step, 1e-8 / lip, 1e8 / lip))
        else:
            step = 1.0 / lip
    beta = _polish_active_set(b1s, b2s, beta)
    return beta / d, iterations


def solve_dual_qp(
    model: KmpModel,
    db_local: ReferenceDatabase,
    cs: ConstraintSet,
    method: str = "auto",
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> QpSolution:
    """Optimal nonnegative multipliers for the assembled constraint set.

    Raises :class:`NotConverged` if the KKT residual (projected gradient and
    complementary slackness) cannot be pushed below tolerance.
    """
    if cs.size == 0:
        return QpSolution(np.zeros(0), 0.0, 0, 0.0)
    b1, b2, _, _, _ = _dual_terms(model, db_local, cs)
    if method == "auto":
        method = "enumerate" if cs.size <= ENUM_LIMIT else "pgbb"
    if method == "enumerate":
        alpha, obj = _solve_enumerate(b1, b2)
        iterations = 2 ** cs.size
    elif method == "pgbb":
        alpha, iterations = _solve_pgbb(b1, b2, tol, max_iter)
        obj = float(alpha @ b1 @ alpha + b2 @ alpha)
    else:
        raise ValueError(f"unknown method {method!r}")
    kkt = _kkt_residual(b1, b2, alpha)
    limit = KKT_TOL * max(1.0, float(np.max(np.abs(b2))))
    if kkt > limit:
        raise NotConverged(
            f"KKT residual {kkt:.3g} above tolerance {limit:.3g} after {iterations} iterations"
        )
    return QpSolution(alpha, float(obj), iterations, kkt)


def predict_constrained(
    model: KmpModel,
    db_local: ReferenceDatabase,
    cs: ConstraintSet,
    solution: QpSolution,
    queries,
    with_covariance: bool = True,
) -> TrajectoryDistribution:
    """Constrained mean k* (K + reg Sigma)^-1 (mu + Sigma G a*); covariance as unconstrained."""
    if cs.size == 0 or not np.any(solution.alpha):
        base = kmp_predict_mean(model.with_database(db_local), queries)
    else:
        local_model = model.with_database(db_local)
        sigma = _stacked_cov(db_local)
        rhs = db_local.mu.reshape(-1) + sigma @ (cs.g_bar @ solution.alpha)
        factor = _factor(local_model.gram + local_model.mean_reg * sigma)
        weights = cho_solve(factor, rhs).reshape(-1, 2)
        q = np.atleast_1d(np.asarray(queries, float))
        kq = phase_kernel(q[:, None], db_local.s[None, :], local_model.kernel_decay)
        base = TrajectoryDistribution(q, kq @ weights)
    if not with_covariance:
        return base
    covs = kmp_predict_cov(model.with_database(db_local), base.phases)
    return TrajectoryDistribution(base.phases, base.means, covs)
