"""Synthetic loss families for bound verification and quick CLI runs."""

from __future__ import annotations

import numpy as np

from delayed_oco.data import ExperimentDataset
from delayed_oco.losses import HingeL2Loss, QuadraticLoss
from delayed_oco.rng import make_generator

__all__ = ["ball_points", "hinge_dataset", "hinge_losses", "quadratic_losses"]


def ball_points(rng: np.random.Generator, count: int, n: int, radius: float = 1.0) -> np.ndarray:
    """Points drawn uniformly from the n-ball of the given radius."""
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return g * r[:, None]


def quadratic_losses(T: int, n: int, lam: float, seed: int = 0, anchor_radius: float = 1.0) -> list[QuadraticLoss]:
    """``(lam/2)||x - a_t||^2`` with anchors uniform in a ball of ``anchor_radius``."""
    rng = make_generator(seed, "synthetic")
    anchors = ball_points(rng, T, n, anchor_radius)
    return [QuadraticLoss(a, lam, uid=t + 1) for t, a in enumerate(anchors)]


def hinge_dataset(
    T: int,
    n: int,
    seed: int = 0,
    *,
    test: int = 0,
    feature_radius: float = 1.0,
    flip: float = 0.1,
) -> ExperimentDataset:
    """Linearly separable features in a ball, labels flipped with probability ``flip``."""
    rng = make_generator(seed, "synthetic")
    total = T + test
    X = ball_points(rng, total, n, feature_radius)
    w = rng.standard_normal(n)
    y = np.where(X @ w >= 0, 1, -1)
    y = np.where(rng.random(total) < flip, -y, y)
    idx = np.arange(total)
    return ExperimentDataset(X[:T], y[:T], X[T:], y[T:], idx, name="synthetic")


def hinge_losses(T: int, n: int, lam: float, seed: int = 0, **kwargs) -> list[HingeL2Loss]:
    return hinge_dataset(T, n, seed, **kwargs).hinge_losses(lam)
