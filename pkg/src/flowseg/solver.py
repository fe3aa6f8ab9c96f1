"""First-order primal-dual solver for the convex multi-label partitioning
relaxation.

The discrete energy over soft assignments u(x) in the probability simplex is

    sum_x sum_i u_i(x) h_i(x)  +  (lambda/2) sum_i sum_x g(x) |grad u_i(x)|

with forward-difference gradients. The dual variable p_i is a per-pixel
2-vector constrained to the ball of radius (lambda/2) g(x); the scheme
alternates dual ascent, primal descent with a simplex projection, and
over-relaxation. Step sizes are 1/sqrt(8), matching the operator norm bound
|grad|^2 <= 8 of the discretization, so the iteration is unconditionally
stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError

STEP_SIZE = 1.0 / np.sqrt(8.0)


@dataclass(frozen=True)
class SolverLimits:
    """Stopping rules.

    The hard cap is ``max_iters``, raised to ``extended_iters`` once, when
    the objective at iteration ``max_iters`` still exceeds
    ``extend_objective_threshold``. The iteration stops early when the
    objective decrease between consecutive iterations falls below
    ``min_decrease`` (set it to ``-inf`` to disable early stopping). The
    defaults suit video-sized problems; on small instances scale
    ``min_decrease`` down with the objective magnitude.
    """

    max_iters: int = 3000
    extended_iters: int = 6000
    extend_objective_threshold: float = 600000.0
    min_decrease: float = 10.0


@dataclass
class SolverReport:
    iterations: int
    final_objective: float
    trace: list = field(repr=False)
    termination: str  # "max_iters" or "small_decrease"


def project_simplex(v):
    """Euclidean projection of a vector onto the probability simplex.

    Sorting-based algorithm: find the largest support size rho for which
    the shifted entries stay positive, then clip by the common shift.
    """
    v = np.asarray(v, dtype=np.float64)
    return _project_simplex_field(v[None, None, :])[0, 0]


def _project_simplex_field(v):
    """Simplex projection along the last axis of an (H, W, n) field."""
    n = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    cumulative = np.cumsum(u, axis=-1)
    k = np.arange(1, n + 1, dtype=np.float64)
    support = np.count_nonzero(u * k + (1.0 - cumulative) > 0, axis=-1)
    idx = support[..., None] - 1
    shift = (np.take_along_axis(cumulative, idx, axis=-1)[..., 0] - 1.0) / support
    return np.maximum(v - shift[..., None], 0.0)


def _gradient(u):
    """Forward differences, zero at the last row/column (Neumann)."""
    grad = np.zeros(u.shape + (2,))
    grad[:, :-1, :, 0] = u[:, 1:, :] - u[:, :-1, :]
    grad[:-1, :, :, 1] = u[1:, :, :] - u[:-1, :, :]
    return grad


def _divergence(p):
    """Negative adjoint of :func:`_gradient`, so <grad u, p> = -<u, div p>."""
    div = np.zeros(p.shape[:3])
    dx = p[:, :, :, 0]
    dy = p[:, :, :, 1]
    div[:, :-1, :] += dx[:, :-1, :]
    div[:, 1:, :] -= dx[:, :-1, :]
    div[:-1, :, :] += dy[:-1, :, :]
    div[1:, :, :] -= dy[:-1, :, :]
    return div


def one_hot(mask, n_labels):
    """Indicator assignment (H, W, n) of an integer label mask."""
    height, width = mask.shape
    u = np.zeros((height, width, n_labels))
    ys, xs = np.mgrid[0:height, 0:width]
    u[ys, xs, mask] = 1.0
    return u


def objective(u, costs, weight, lam):
    """Discrete partitioning energy of a (possibly soft) assignment.

    ``costs`` may be a CostVolume or a plain (H, W, n) array.
    """
    h = getattr(costs, "costs", costs)
    data = np.sum(u * h)
    grad_norms = np.linalg.norm(_gradient(u), axis=-1)
    perimeter = np.sum(weight[:, :, None] * grad_norms)
    return float(data + 0.5 * lam * perimeter)


def solve(costs, weight, lam, limits=None, callback=None):
    """Minimize the partitioning energy; returns (label mask, SolverReport).

    ``costs`` is a :class:`~flowseg.data_term.CostVolume`; its clamp set is
    held fixed at the clamped one-hot labels throughout. The primal iterate
    starts from the per-pixel argmin of the costs (ties to the lowest
    label). The output mask is the per-pixel argmax of the final u, ties to
    the lowest label, so identical inputs always produce identical masks.

    ``callback(iteration, u, p)`` runs after every completed iteration,
    which instrumented tests use to check the simplex and dual-ball
    invariants.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    limits = limits or SolverLimits()
    h = costs.costs
    if not np.isfinite(h).all():
        raise DivergenceError("cost volume contains non-finite values")
    clamp = costs.clamp
    clamped = clamp >= 0
    clamp_rows, clamp_cols = np.nonzero(clamped)
    clamp_labels = clamp[clamped]

    def enforce_clamps(u):
        if clamp_rows.size:
            u[clamp_rows, clamp_cols, :] = 0.0
            u[clamp_rows, clamp_cols, clamp_labels] = 1.0

    u = one_hot(np.argmin(h, axis=2), h.shape[2])
    enforce_clamps(u)
    u_bar = u.copy()
    p = np.zeros(u.shape + (2,))
    radius = 0.5 * lam * weight

    objectives = [objective(u, h, weight, lam)]
    hard_cap = limits.max_iters
    extended = False
    termination = "max_iters"
    iteration = 0
    while iteration < hard_cap:
        iteration += 1
        p += STEP_SIZE * _gradient(u_bar)
        norms = np.linalg.norm(p, axis=-1)
        factor = np.ones_like(norms)
        over = norms > radius[:, :, None]
        np.divide(
            np.broadcast_to(radius[:, :, None], norms.shape), norms,
            out=factor, where=over,
        )
        p *= factor[..., None]

        u_old = u
        u = _project_simplex_field(u + STEP_SIZE * (_divergence(p) - h))
        enforce_clamps(u)
        u_bar = 2.0 * u - u_old

        value = objective(u, h, weight, lam)
        if not np.isfinite(value):
            raise DivergenceError(f"objective became non-finite at iteration {iteration}")
        objectives.append(value)
        if callback is not None:
            callback(iteration, u, p)
        if objectives[-2] - objectives[-1] < limits.min_decrease:
            termination = "small_decrease"
            break
        if (
            iteration == limits.max_iters
            and not extended
            and value > limits.extend_objective_threshold
        ):
            hard_cap = limits.extended_iters
            extended = True

    mask = np.argmax(u, axis=2).astype(np.int32)
    report = SolverReport(
        iterations=iteration,
        final_objective=objectives[-1],
        trace=objectives,
        termination=termination,
    )
    return mask, report
