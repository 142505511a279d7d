"""Certified minimization of sums of losses over a Euclidean ball.

Any finite sum of the losses in :mod:`delayed_oco.losses` collapses to

    P(x) = sum_s max(0, 1 - <u_s, x>) + (c/2) ||x||^2 + <b, x> + const,   ||x|| <= R

with ``c`` the total strong-convexity modulus. Without hinge terms the
minimizer is ``project_ball(-b / c, R)``. With hinge terms we run coordinate
ascent on the dual

    D(a) = sum_s a_s - h(||U^T a - b||),   a in [0, 1]^m,

where ``h`` is the support function of the ball smoothed by ``c`` (a Huber
function). The primal point recovered from ``a`` is
``project_ball((U^T a - b) / c, R)`` and ``P - D`` bounds its suboptimality,
so ``||x - x*||^2 <= 2 (P - D) / c``.

Once the gap is small, the rows whose margin may still equal one are known.
:func:`_polish` then solves the KKT system restricted to those rows in closed
form and keeps the result only if it satisfies the optimality conditions,
which removes the floating-point floor of the iterative certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy.optimize import brentq

from delayed_oco.core import BallDomain

__all__ = [
    "CompositeObjective",
    "SolveResult",
    "SolverError",
    "inner_minimize",
    "project_ball",
    "solve",
]

MAX_EPOCHS = 10_000
# floating-point floor on the certified gap, relative to the objective's scale
REL_FLOOR = 1e-13
# slack allowed on multipliers and margins when verifying a polished point
KKT_SLACK = 1e-12


def project_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x : ||x|| <= radius}``."""
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm <= radius:
        return v.copy()
    return v * (radius / norm)


class SolverError(RuntimeError):
    def __init__(self, message: str, gap: float, epochs: int, x: np.ndarray):
        super().__init__(f"{message} (gap={gap:.3e} after {epochs} epochs)")
        self.gap = gap
        self.epochs = epochs
        self.x = x


@dataclass(frozen=True, eq=False)
class CompositeObjective:
    """Sum of losses in the hinge + quadratic + linear normal form."""

    hinge: np.ndarray  # (m, n), one row u_s per hinge term
    curvature: float
    linear: np.ndarray
    constant: float = 0.0

    @classmethod
    def from_losses(cls, losses: Sequence, dimension: int | None = None) -> CompositeObjective:
        if not losses:
            if dimension is None:
                raise ValueError("empty loss list needs an explicit dimension")
            return cls(np.zeros((0, dimension)), 0.0, np.zeros(dimension))
        n = losses[0].dimension
        if dimension is not None and dimension != n:
            raise ValueError(f"losses have dimension {n}, expected {dimension}")
        rows = []
        c = 0.0
        b = np.zeros(n)
        const = 0.0
        for loss in losses:
            if loss.dimension != n:
                raise ValueError("losses of mixed dimension")
            c += loss.curvature
            b += loss.linear
            const += loss.constant
            u = loss.hinge_vector
            if u is not None:
                rows.append(u)
        hinge = np.array(rows, dtype=float).reshape(len(rows), n)
        return cls(hinge, c, b, const)

    @property
    def dimension(self) -> int:
        return self.linear.shape[0]

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        hinge = np.maximum(1.0 - self.hinge @ x, 0.0).sum() if len(self.hinge) else 0.0
        return float(hinge + 0.5 * self.curvature * (x @ x) + self.linear @ x + self.constant)

    def values(self, X: np.ndarray) -> np.ndarray:
        """Vectorized ``value`` over the rows of ``X``."""
        X = np.asarray(X, dtype=float)
        out = 0.5 * self.curvature * np.einsum("ij,ij->i", X, X) + X @ self.linear + self.constant
        for u in self.hinge:
            out += np.maximum(1.0 - X @ u, 0.0)
        return out

    def scale(self, radius: float) -> float:
        return 1.0 + len(self.hinge) + self.curvature * radius**2 + float(np.linalg.norm(self.linear)) * radius


@dataclass
class SolveResult:
    x: np.ndarray
    gap: float
    epochs: int
    converged: bool
    alpha: np.ndarray
    objective: float


@njit(cache=True)
def _dual_ascent(U, b, c, R, alpha, target, max_epochs):
    m, n = U.shape
    unorm2 = np.empty(m)
    for s in range(m):
        unorm2[s] = np.dot(U[s], U[s])
    v = -b.copy()
    for s in range(m):
        if unorm2[s] == 0.0:
            alpha[s] = 1.0
        elif alpha[s] != 0.0:
            v += alpha[s] * U[s]
    vnorm = np.sqrt(np.dot(v, v))
    gap = np.inf
    epoch = 0
    while epoch < max_epochs:
        epoch += 1
        for s in range(m):
            q = unorm2[s]
            if q == 0.0:
                continue
            scale = 1.0 / c if vnorm <= c * R else R / vnorm
            g = 1.0 - scale * np.dot(U[s], v)
            a_new = min(max(alpha[s] + c * g / q, 0.0), 1.0)
            delta = a_new - alpha[s]
            if delta != 0.0:
                alpha[s] = a_new
                v += delta * U[s]
                vnorm = np.sqrt(np.dot(v, v))
        # rebuild v from alpha so the certificate never rests on accumulated drift
        v[:] = -b
        for s in range(m):
            if alpha[s] != 0.0:
                v += alpha[s] * U[s]
        vnorm = np.sqrt(np.dot(v, v))
        if vnorm <= c * R:
            x = v / c
            h = vnorm * vnorm / (2.0 * c)
        else:
            x = v * (R / vnorm)
            h = R * vnorm - 0.5 * c * R * R
        primal = 0.5 * c * np.dot(x, x) + np.dot(b, x)
        for s in range(m):
            primal += max(1.0 - np.dot(U[s], x), 0.0)
        dual = alpha.sum() - h
        gap = primal - dual
        if gap <= target:
            return x, gap, epoch, True
    scale = 1.0 / c if vnorm <= c * R else R / vnorm
    return v * scale, gap, epoch, False


def _dual_value(objective: CompositeObjective, alpha: np.ndarray, R: float) -> float:
    c = objective.curvature
    v = objective.hinge.T @ alpha - objective.linear
    vn = float(np.linalg.norm(v))
    h = vn * vn / (2 * c) if vn <= c * R else R * vn - 0.5 * c * R * R
    return float(alpha.sum() - h + objective.constant)


def _polish(objective: CompositeObjective, R: float, x: np.ndarray, gap: float):
    """Exact minimizer from the active set near ``x``, or ``None`` if it fails the KKT check."""
    U, b, c = objective.hinge, objective.linear, objective.curvature
    unorm = np.linalg.norm(U, axis=1)
    radius = np.sqrt(2.0 * max(gap, 0.0) / c)
    margin = U @ x
    edge = np.abs(1.0 - margin) <= unorm * radius + 1e-12 * (1.0 + unorm)
    active = (margin < 1.0) & ~edge
    E = U[edge]
    v0 = U[active].sum(axis=0) - b
    if len(E) > U.shape[1]:
        return None

    def point(mu: float):
        k = c + mu
        if len(E):
            a_e = np.linalg.lstsq(E @ E.T, k - E @ v0, rcond=None)[0]
        else:
            a_e = np.zeros(0)
        return (v0 + E.T @ a_e) / k, a_e

    x_p, a_e = point(0.0)
    if np.linalg.norm(x_p) > R:
        def excess(mu: float) -> float:
            return float(np.linalg.norm(point(mu)[0]) - R)

        hi = max(1.0, c)
        while excess(hi) > 0:
            hi *= 4.0
            if hi > 1e30:
                return None
        try:
            mu = brentq(excess, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)
        except ValueError:
            return None
        x_p, a_e = point(mu)
        x_p = project_ball(x_p, R)
    if len(a_e) and (a_e.min() < -KKT_SLACK or a_e.max() > 1.0 + KKT_SLACK):
        return None
    m_p = U @ x_p
    tol = KKT_SLACK * (1.0 + unorm * R)
    if np.any(m_p[active] > 1.0 + tol[active]):
        return None
    idle = ~active & ~edge
    if np.any(m_p[idle] < 1.0 - tol[idle]):
        return None
    if np.any(np.abs(m_p[edge] - 1.0) > tol[edge]):
        return None
    alpha = active.astype(float)
    alpha[edge] = np.clip(a_e, 0.0, 1.0)
    return x_p, alpha


def solve(
    objective: CompositeObjective,
    radius: float,
    tol: float = 1e-9,
    *,
    alpha0: np.ndarray | None = None,
    max_epochs: int = MAX_EPOCHS,
    raise_on_failure: bool = True,
) -> SolveResult:
    """Minimize ``objective`` over the ball; ``tol`` is a distance to the optimum.

    Stops once the duality gap is at most ``c * tol**2 / 2`` (or the floating
    point floor ``REL_FLOOR * scale``), which certifies ``||x - x*|| <= tol``
    in the first case.
    """
    c = float(objective.curvature)
    b = np.ascontiguousarray(objective.linear, dtype=float)
    m = len(objective.hinge)
    if m == 0:
        if c <= 0:
            x = np.zeros_like(b)
        else:
            x = project_ball(-b / c, radius)
        return SolveResult(x, 0.0, 0, True, np.zeros(0), objective.value(x))
    if c <= 0:
        raise ValueError("hinge terms need a strictly positive curvature")
    target = max(0.5 * c * tol * tol, REL_FLOOR * objective.scale(radius))
    alpha = np.zeros(m) if alpha0 is None else np.clip(np.array(alpha0, dtype=float), 0.0, 1.0)
    if alpha.shape != (m,):
        raise ValueError(f"alpha0 has shape {alpha.shape}, expected ({m},)")
    U = np.ascontiguousarray(objective.hinge, dtype=float)
    x, gap, epochs, ok = _dual_ascent(U, b, c, float(radius), alpha, target, int(max_epochs))
    x = project_ball(x, radius)
    if not ok and raise_on_failure:
        raise SolverError("inner solver did not reach the target gap", float(gap), int(epochs), x)
    value = objective.value(x)
    if ok:
        polished = _polish(objective, float(radius), x, float(gap))
        if polished is not None:
            x_p, alpha_p = polished
            value_p = objective.value(x_p)
            gap_p = value_p - _dual_value(objective, alpha_p, float(radius))
            if value_p <= value + REL_FLOOR * objective.scale(radius):
                x, alpha, value, gap = x_p, alpha_p, value_p, min(float(gap), max(gap_p, 0.0))
    return SolveResult(x, float(gap), int(epochs), bool(ok), alpha, value)


def inner_minimize(losses: Sequence, domain: BallDomain, tol: float = 1e-9, **kwargs) -> np.ndarray:
    """Minimizer of ``sum(losses)`` over ``domain`` to within ``tol``."""
    objective = CompositeObjective.from_losses(losses, domain.dimension)
    return solve(objective, domain.radius, tol, **kwargs).x
