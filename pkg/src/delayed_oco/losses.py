"""Strongly convex per-round losses and the surrogate feedback vector.

Each loss is written in the common form

    f(x) = hinge_weight * max(0, 1 - <u, x>) + (curvature / 2) ||x||^2 + <linear, x> + constant

(``u`` absent for losses without a hinge term). The inner solver only ever
sees these four pieces, so sums of mixed losses are minimized in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

__all__ = [
    "HingeL2Loss",
    "LipschitzBudget",
    "Loss",
    "QuadraticLoss",
    "SurrogateLoss",
    "loss_gradient",
    "loss_value",
    "surrogate_value",
    "surrogate_vector",
]


class Loss(Protocol):
    strong_convexity: float

    @property
    def dimension(self) -> int: ...

    @property
    def curvature(self) -> float: ...

    @property
    def linear(self) -> np.ndarray: ...

    @property
    def constant(self) -> float: ...

    @property
    def hinge_vector(self) -> np.ndarray | None: ...

    @property
    def vector_count(self) -> int: ...

    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...


def _vec(x: np.ndarray, n: int, what: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"{what} has shape {x.shape}, expected ({n},)")
    return x


def _frozen(v: Iterable[float] | np.ndarray) -> np.ndarray:
    arr = np.array(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HingeL2Loss:
    """``max{1 - y <w, x>, 0} + (lam/2) ||x||^2`` for one labeled example."""

    features: np.ndarray
    label: int
    strong_convexity: float
    uid: object = None
    _u: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        if not self.strong_convexity > 0:
            raise ValueError("strong_convexity must be > 0")
        w = _frozen(self.features)
        object.__setattr__(self, "features", w)
        object.__setattr__(self, "_u", _frozen(self.label * w))

    @property
    def dimension(self) -> int:
        return self.features.shape[0]

    @property
    def curvature(self) -> float:
        return self.strong_convexity

    @property
    def linear(self) -> np.ndarray:
        return np.zeros(self.dimension)

    @property
    def constant(self) -> float:
        return 0.0

    @property
    def hinge_vector(self) -> np.ndarray:
        return self._u

    @property
    def vector_count(self) -> int:
        return 1

    def margin(self, x: np.ndarray) -> float:
        return float(self._u @ _vec(x, self.dimension))

    def value(self, x: np.ndarray) -> float:
        x = _vec(x, self.dimension)
        return max(1.0 - float(self._u @ x), 0.0) + 0.5 * self.strong_convexity * float(x @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        # at margin exactly 1 the hinge contributes 0 (a valid subgradient)
        x = _vec(x, self.dimension)
        g = self.strong_convexity * x
        if 1.0 - float(self._u @ x) > 0.0:
            g = g - self._u
        return g

    def gradient_bound(self, radius: float) -> float:
        return self.strong_convexity * radius + float(np.linalg.norm(self.features))


@dataclass(frozen=True, eq=False)
class QuadraticLoss:
    """``(lam/2) ||x - anchor||^2 + offset``; minimizer over a ball is closed form."""

    anchor: np.ndarray
    strong_convexity: float
    offset: float = 0.0
    uid: object = None

    def __post_init__(self) -> None:
        if not self.strong_convexity > 0:
            raise ValueError("strong_convexity must be > 0")
        object.__setattr__(self, "anchor", _frozen(self.anchor))

    @property
    def dimension(self) -> int:
        return self.anchor.shape[0]

    @property
    def curvature(self) -> float:
        return self.strong_convexity

    @property
    def linear(self) -> np.ndarray:
        return -self.strong_convexity * self.anchor

    @property
    def constant(self) -> float:
        return 0.5 * self.strong_convexity * float(self.anchor @ self.anchor) + self.offset

    @property
    def hinge_vector(self) -> None:
        return None

    @property
    def vector_count(self) -> int:
        return 1

    def value(self, x: np.ndarray) -> float:
        diff = _vec(x, self.dimension) - self.anchor
        return 0.5 * self.strong_convexity * float(diff @ diff) + self.offset

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.strong_convexity * (_vec(x, self.dimension) - self.anchor)

    def gradient_bound(self, radius: float) -> float:
        return self.strong_convexity * (radius + float(np.linalg.norm(self.anchor)))


@dataclass(frozen=True, eq=False)
class SurrogateLoss:
    """``<z, x> + (lam/2) ||x||^2``, the loss rebuilt from a shared vector ``z``."""

    z: np.ndarray
    strong_convexity: float
    uid: object = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", _frozen(self.z))

    @property
    def dimension(self) -> int:
        return self.z.shape[0]

    @property
    def curvature(self) -> float:
        return self.strong_convexity

    @property
    def linear(self) -> np.ndarray:
        return self.z

    @property
    def constant(self) -> float:
        return 0.0

    @property
    def hinge_vector(self) -> None:
        return None

    @property
    def vector_count(self) -> int:
        return 1

    def value(self, x: np.ndarray) -> float:
        return surrogate_value(self.z, self.strong_convexity, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.z + self.strong_convexity * _vec(x, self.dimension)

    def gradient_bound(self, radius: float) -> float:
        return float(np.linalg.norm(self.z)) + self.strong_convexity * radius


@dataclass(frozen=True)
class LipschitzBudget:
    """Uniform gradient-norm bound ``G`` over the domain."""

    G: float

    def __post_init__(self) -> None:
        if not self.G > 0:
            raise ValueError(f"G must be > 0, got {self.G}")

    @classmethod
    def for_losses(cls, losses: Sequence[Loss], radius: float) -> LipschitzBudget:
        return cls(max(loss.gradient_bound(radius) for loss in losses))

    def admits(self, gradient: np.ndarray, slack: float = 1e-12) -> bool:
        return float(np.linalg.norm(gradient)) <= self.G + slack


def loss_value(loss: Loss, x: np.ndarray) -> float:
    return loss.value(x)


def loss_gradient(loss: Loss, x: np.ndarray) -> np.ndarray:
    return loss.gradient(x)


def surrogate_vector(grad: np.ndarray, x_t: np.ndarray, lam: float) -> np.ndarray:
    """``z_t = grad f_t(x_t) - lam * x_t``."""
    grad = np.asarray(grad, dtype=float)
    x_t = _vec(x_t, grad.shape[0], "x_t")
    return grad - lam * x_t


def surrogate_value(z: np.ndarray, lam: float, x: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    x = _vec(x, z.shape[0])
    return float(z @ x) + 0.5 * lam * float(x @ x)
