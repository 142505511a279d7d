"""Reference computations for tests and metrics.

The ideal (one-step-ahead) leader, the offline optimum, regret curves with
their theoretical envelopes, test accuracy, and two solver-independent
minimizers: a dense grid for ``n <= 2`` and plain projected gradient
descent for smooth objectives.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from delayed_oco.core import BallDomain, RunTrace
from delayed_oco.losses import SurrogateLoss, surrogate_vector
from delayed_oco.solver import CompositeObjective, SolveResult, project_ball, solve

__all__ = [
    "IdealDecisionSequence",
    "RegretReport",
    "distance_audit",
    "ftal_decisions",
    "ftl_decisions",
    "grid_minimize",
    "ideal_sequence",
    "growth_slack",
    "offline_optimum",
    "projected_gradient_argmin",
    "regret_curve",
    "surrogate_losses",
    "test_accuracy",
    "ftdl_bound",
    "aftdl_bound",
    "unconstrained_bound",
]


def ftdl_bound(t, d: int, G: float, lam: float):
    """``2 d G^2 (1 + ln t) / lam`` (FTDL)."""
    return 2.0 * d * G**2 * (1.0 + np.log(t)) / lam


def aftdl_bound(t, d: int, G: float, lam: float, R: float):
    """``2 d (G + 2 lam R)^2 (ln t + 1) / lam`` (A-FTDL)."""
    return 2.0 * d * (G + 2.0 * lam * R) ** 2 * (np.log(t) + 1.0) / lam


def unconstrained_bound(t, d: int, G: float, lam: float):
    """``50 d G^2 (ln t + 1) / lam`` (A-FTDL on the ball of radius 2G/lam)."""
    return 50.0 * d * G**2 * (np.log(t) + 1.0) / lam


def offline_optimum(
    losses: Sequence, domain: BallDomain, tol: float = 1e-9, *, full_output: bool = False
) -> np.ndarray | SolveResult:
    """``argmin_K sum_t f_t``; raises unless the gap is at most ``1e-8 (1 + |objective|)``."""
    if not losses:
        raise ValueError("offline_optimum needs at least one loss")
    objective = CompositeObjective.from_losses(losses, domain.dimension)
    res = solve(objective, domain.radius, tol, max_epochs=100_000)
    if res.gap > 1e-8 * (1.0 + abs(res.objective)):
        raise RuntimeError(f"offline optimum not certified: gap {res.gap:.3e}")
    return res if full_output else res.x


@dataclass
class IdealDecisionSequence:
    decisions: np.ndarray  # row t-1 minimizes the first t losses
    kind: str
    leader_gap: float  # sum_t f_t(x~_t) - min sum_t f_t, should be <= 0

    def __len__(self) -> int:
        return len(self.decisions)


def ideal_sequence(
    losses: Sequence,
    domain: BallDomain,
    tol: float = 1e-10,
    *,
    kind: str = "true",
    leader_tol: float | None = 1e-7,
) -> IdealDecisionSequence:
    """Prefix minimizers ``x~_t = argmin_K sum_{s<=t} f_s``.

    Pure quadratic/surrogate sequences use the running closed form; sequences
    with hinge terms re-solve each prefix, warm-started from the previous
    dual point. The non-positive-regret property of the sequence is checked
    against ``leader_tol`` unless it is ``None``.
    """
    T, n, R = len(losses), domain.dimension, domain.radius
    out = np.zeros((T, n))
    c, b = 0.0, np.zeros(n)
    rows: list[np.ndarray] = []
    alpha = np.zeros(0)
    for t, loss in enumerate(losses):
        c += loss.curvature
        b = b + loss.linear
        if loss.hinge_vector is not None:
            rows.append(loss.hinge_vector)
            alpha = np.append(alpha, 0.0)
        if not rows:
            out[t] = project_ball(-b / c, R)
            continue
        res = solve(CompositeObjective(np.array(rows), c, b), R, tol, alpha0=alpha, max_epochs=100_000)
        alpha = res.alpha
        out[t] = res.x
    total_ideal = sum(loss.value(out[t]) for t, loss in enumerate(losses))
    x_star = offline_optimum(losses, domain)
    best = sum(loss.value(x_star) for loss in losses)
    seq = IdealDecisionSequence(out, kind, total_ideal - best)
    if leader_tol is not None and seq.leader_gap > leader_tol * max(1.0, abs(best)):
        raise AssertionError(f"ideal sequence has positive regret {seq.leader_gap:.3e}")
    return seq


def surrogate_losses(trace: RunTrace, losses: Sequence, lam: float) -> list[SurrogateLoss]:
    """Rebuild ``f~_t(x) = <z_t, x> + (lam/2)||x||^2`` from the played decisions."""
    out = []
    for t, loss in enumerate(losses):
        x_t = trace.decisions[t]
        out.append(SurrogateLoss(surrogate_vector(loss.gradient(x_t), x_t, lam), lam, uid=t + 1))
    return out


@dataclass
class RegretReport:
    x_star: np.ndarray
    regret: np.ndarray  # cumulative, R_t for t = 1..T
    bound_ftdl: np.ndarray
    bound_aftdl: np.ndarray

    @property
    def final(self) -> float:
        return float(self.regret[-1])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "regret", "bound_thm1", "bound_thm2"])
            for t in range(len(self.regret)):
                w.writerow([t + 1, repr(float(self.regret[t])), repr(float(self.bound_ftdl[t])), repr(float(self.bound_aftdl[t]))])


def regret_curve(
    trace: RunTrace,
    losses: Sequence,
    x_star: np.ndarray,
    *,
    d: int,
    G: float,
    lam: float,
    R: float,
) -> RegretReport:
    if len(losses) != trace.horizon:
        raise ValueError(f"trace has {trace.horizon} rounds but {len(losses)} losses were given")
    best = np.array([loss.value(x_star) for loss in losses])
    regret = np.cumsum(trace.inst_loss - best)
    t = np.arange(1, trace.horizon + 1, dtype=float)
    return RegretReport(np.asarray(x_star, dtype=float), regret, ftdl_bound(t, d, G, lam), aftdl_bound(t, d, G, lam, R))


def distance_audit(decisions: np.ndarray, ideal: IdealDecisionSequence | np.ndarray) -> np.ndarray:
    """``||x_t - x~_t||`` for every round."""
    ref = ideal.decisions if isinstance(ideal, IdealDecisionSequence) else np.asarray(ideal)
    return np.linalg.norm(np.asarray(decisions) - ref, axis=1)


def test_accuracy(x: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Fraction of ``sign(<w, x>) == y``, with ``sign(0)`` taken as ``+1``."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("empty test set")
    pred = np.where(X @ np.asarray(x, dtype=float) >= 0.0, 1, -1)
    return float(np.mean(pred == np.asarray(y)))


test_accuracy.__test__ = False  # keep pytest from collecting it


def _grid_pass(values, center: np.ndarray, half: float, step: float, R: float) -> tuple[np.ndarray, float]:
    n = len(center)
    axes = [np.arange(c - half, c + half + step / 2, step) for c in center]
    if n == 1:
        pts = axes[0][:, None]
        pts = pts[np.abs(pts[:, 0]) <= R]
        v = values(pts)
        k = int(np.argmin(v))
        return pts[k].copy(), float(v[k])
    best_v, best_x = np.inf, None
    for chunk in np.array_split(axes[0], max(1, len(axes[0]) // 200)):
        gx, gy = np.meshgrid(chunk, axes[1], indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        pts = pts[np.einsum("ij,ij->i", pts, pts) <= R * R]
        if not len(pts):
            continue
        v = values(pts)
        k = int(np.argmin(v))
        if v[k] < best_v:
            best_v, best_x = float(v[k]), pts[k].copy()
    return best_x, best_v


def grid_minimize(
    values: Callable[[np.ndarray], np.ndarray],
    domain: BallDomain,
    step: float = 1e-3,
    refine: int = 2,
) -> tuple[np.ndarray, float]:
    """Brute-force minimum over a grid clipped to the ball (``n <= 2``).

    The first pass covers the whole ball at ``step``; each refinement pass
    re-grids a window of 10 previous steps around the incumbent 200x finer.
    """
    n, R = domain.dimension, domain.radius
    if n > 2:
        raise ValueError("grid oracle is limited to n <= 2")
    x, v = _grid_pass(values, np.zeros(n), R, step, R)
    for _ in range(refine):
        half = 10 * step
        step /= 200
        x2, v2 = _grid_pass(values, x, half, step, R)
        if v2 <= v:
            x, v = x2, v2
    return x, v


def projected_gradient_argmin(
    grad: Callable[[np.ndarray], np.ndarray],
    smoothness: float,
    domain: BallDomain,
    x0: np.ndarray | None = None,
    tol: float = 1e-13,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Projected gradient descent with step ``1 / smoothness`` on a smooth
    convex objective; stops when an iteration moves less than ``tol``."""
    x = domain.origin() if x0 is None else np.array(x0, dtype=float)
    for _ in range(max_iter):
        nxt = project_ball(x - grad(x) / smoothness, domain.radius)
        if np.linalg.norm(nxt - x) <= tol:
            return nxt
        x = nxt
    return x


def ftl_decisions(losses: Sequence, domain: BallDomain, tol: float = 1e-10) -> np.ndarray:
    """Follow-the-leader, each round solved from scratch over ``f_1..f_{t-1}``."""
    out = np.zeros((len(losses), domain.dimension))
    for t in range(1, len(losses)):
        objective = CompositeObjective.from_losses(losses[:t], domain.dimension)
        out[t] = solve(objective, domain.radius, tol, max_epochs=100_000).x
    return out


def ftal_decisions(losses: Sequence, domain: BallDomain, lam: float) -> np.ndarray:
    """Follow-the-approximate-leader: minimize
    ``sum_{s<t} <g_s, x> + (lam/2)||x - x_s||^2`` by projected gradient."""
    T, n = len(losses), domain.dimension
    out = np.zeros((T, n))
    grads = np.zeros((T, n))
    for t in range(T):
        if t > 0:
            G_sum = grads[:t].sum(axis=0)
            X_sum = out[:t].sum(axis=0)
            k = t

            def grad(x, G_sum=G_sum, X_sum=X_sum, k=k):
                return G_sum + lam * (k * x - X_sum)

            out[t] = projected_gradient_argmin(grad, k * lam, domain)
        grads[t] = losses[t].gradient(out[t])
    return out


def growth_slack(objective: CompositeObjective, modulus: float, x: np.ndarray, x_star: np.ndarray) -> float:
    """``(2/modulus)(F(x) - F(x*)) - ||x - x*||^2``; nonnegative for a minimizer ``x*``."""
    diff = np.asarray(x) - np.asarray(x_star)
    return 2.0 / modulus * (objective.value(x) - objective.value(x_star)) - float(diff @ diff)
