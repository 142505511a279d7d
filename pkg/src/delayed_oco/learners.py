"""Per-agent online decision rules.

Each learner is the local state of a single agent: it consumes delivered
:class:`~delayed_oco.core.FeedbackMessage` objects via :meth:`receive` and
emits a decision via :meth:`decide` when its agent becomes active.

* :class:`FTDL` minimizes the sum of every received loss (full-loss feedback).
* :class:`AFTDL` minimizes the sum of received surrogates
  ``<z_s, x> + (lam/2)||x||^2``, which reduces to one ball projection.
* :class:`DDA` is delayed dual averaging with ``R(x) = ||x||^2 / 2`` and the
  delay-aware step size of :func:`dda_eta`.

With one agent and unit delays FTDL is follow-the-leader and AFTDL is
follow-the-approximate-leader.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from delayed_oco.core import BallDomain, FeedbackMessage, FeedbackMode, RunConfig
from delayed_oco.solver import MAX_EPOCHS, CompositeObjective, inner_minimize, project_ball, solve

__all__ = [
    "AFTDL",
    "DDA",
    "FTDL",
    "LEARNERS",
    "Learner",
    "aftdl_closed_form",
    "dda_eta",
    "inner_minimize",
    "make_learner",
    "project_ball",
    "unconstrained_wrap",
]


class Learner:
    name = "base"
    mode: FeedbackMode

    def __init__(self, domain: BallDomain):
        self.domain = domain
        self.count = 0

    def receive(self, msg: FeedbackMessage) -> None:
        if msg.mode is not self.mode:
            raise ValueError(f"{self.name} expects {self.mode.value} feedback, got {msg.mode.value}")
        self.count += 1
        self._absorb(msg)

    def _absorb(self, msg: FeedbackMessage) -> None:
        raise NotImplementedError

    def decide(self) -> np.ndarray:
        raise NotImplementedError

    def aggregate_norm(self) -> float:
        """Norm of the running vector aggregate (for debugging dumps)."""
        return 0.0


class FTDL(Learner):
    """Follow-the-delayed-leader: ``argmin_K sum_{s in F_t} f_s``."""

    name = "ftdl"
    mode = FeedbackMode.FULL_LOSS

    def __init__(self, domain: BallDomain, tol: float = 1e-9, max_epochs: int = MAX_EPOCHS):
        super().__init__(domain)
        self.tol = tol
        self.max_epochs = max_epochs
        n = domain.dimension
        self.curvature = 0.0
        self.linear = np.zeros(n)
        self.constant = 0.0
        self._rows = np.zeros((16, n))
        self._alpha = np.zeros(16)
        self._m = 0
        self.last_result = None

    def _absorb(self, msg: FeedbackMessage) -> None:
        loss = msg.payload
        if loss.dimension != self.domain.dimension:
            raise ValueError("loss dimension does not match the domain")
        self.curvature += loss.curvature
        self.linear += loss.linear
        self.constant += loss.constant
        u = loss.hinge_vector
        if u is not None:
            if self._m == len(self._rows):
                self._rows = np.concatenate([self._rows, np.zeros_like(self._rows)])
                self._alpha = np.concatenate([self._alpha, np.zeros_like(self._alpha)])
            self._rows[self._m] = u
            self._m += 1

    def objective(self) -> CompositeObjective:
        return CompositeObjective(self._rows[: self._m], self.curvature, self.linear.copy(), self.constant)

    def decide(self) -> np.ndarray:
        if self.count == 0:
            return self.domain.origin()
        if self._m == 0:
            return project_ball(-self.linear / self.curvature, self.domain.radius)
        # dual variables of losses already seen warm-start the next solve
        res = solve(
            self.objective(),
            self.domain.radius,
            self.tol,
            alpha0=self._alpha[: self._m],
            max_epochs=self.max_epochs,
        )
        self._alpha[: self._m] = res.alpha
        self.last_result = res
        return res.x

    def aggregate_norm(self) -> float:
        return float(np.linalg.norm(self.linear))


def aftdl_closed_form(z_sum: np.ndarray, count: int, lam: float, radius: float) -> np.ndarray:
    """Minimizer over the ball of ``<z_sum, x> + count * (lam/2) ||x||^2``."""
    z_sum = np.asarray(z_sum, dtype=float)
    if count == 0:
        return np.zeros_like(z_sum)
    return project_ball(-z_sum / (count * lam), radius)


class AFTDL(Learner):
    """Approximate FTDL on surrogate vectors ``z_s = grad f_s(x_s) - lam x_s``.

    Decisions depend on the received feedback only through ``z_sum`` and the
    count. With ``canonical=True`` the sum is re-accumulated in ascending
    origin-round order at each decision, so any delivery permutation of the
    same messages gives bit-identical decisions (at O(|F_t| n) per decision).
    """

    name = "aftdl"
    mode = FeedbackMode.SURROGATE

    def __init__(self, domain: BallDomain, strong_convexity: float, canonical: bool = False):
        super().__init__(domain)
        if not strong_convexity > 0:
            raise ValueError("strong_convexity must be > 0")
        self.lam = strong_convexity
        self.canonical = canonical
        self.z_sum = np.zeros(domain.dimension)
        self._by_origin: dict[int, np.ndarray] = {}

    def _absorb(self, msg: FeedbackMessage) -> None:
        z = msg.payload
        self.z_sum += z
        if self.canonical:
            self._by_origin[msg.origin] = z

    def canonical_sum(self) -> np.ndarray:
        total = np.zeros(self.domain.dimension)
        for s in sorted(self._by_origin):
            total += self._by_origin[s]
        return total

    def decide(self) -> np.ndarray:
        z_sum = self.canonical_sum() if self.canonical else self.z_sum
        return aftdl_closed_form(z_sum, self.count, self.lam, self.domain.radius)

    def aggregate_norm(self) -> float:
        return float(np.linalg.norm(self.z_sum))


def dda_eta(count: int, R: float, G: float, d: int) -> float:
    """Step size ``R / (sqrt(2) G sqrt((1 + 2d)(count + d + 1)))``."""
    if count < 0 or d < 1:
        raise ValueError("need count >= 0 and d >= 1")
    return R / (math.sqrt(2.0) * G * math.sqrt((1 + 2 * d) * (count + d + 1)))


class DDA(Learner):
    """Delayed dual averaging with the quadratic regularizer and known ``d``."""

    name = "dda"
    mode = FeedbackMode.GRADIENT

    def __init__(self, domain: BallDomain, G: float, max_delay: int):
        super().__init__(domain)
        if not G > 0:
            raise ValueError("G must be > 0")
        self.G = G
        self.max_delay = max_delay
        self.grad_sum = np.zeros(domain.dimension)

    def _absorb(self, msg: FeedbackMessage) -> None:
        self.grad_sum += msg.payload

    @property
    def eta(self) -> float:
        return dda_eta(self.count, self.domain.radius, self.G, self.max_delay)

    def decide(self) -> np.ndarray:
        return project_ball(-self.eta * self.grad_sum, self.domain.radius)

    def aggregate_norm(self) -> float:
        return float(np.linalg.norm(self.grad_sum))


def unconstrained_wrap(G: float, lam: float, dimension: int = 1) -> BallDomain:
    """Ball of radius ``2G / lam``; it contains the unconstrained optimum of
    any sum of ``lam``-strongly convex losses that are ``G``-Lipschitz at 0."""
    if not (G > 0 and lam > 0):
        raise ValueError("G and lam must be > 0")
    return BallDomain(dimension, 2.0 * G / lam)


LEARNERS: dict[str, type[Learner]] = {"ftdl": FTDL, "aftdl": AFTDL, "dda": DDA}


def make_learner(name: str, config: RunConfig, G: float | None = None, **kwargs) -> Callable[[], Learner]:
    """Factory producing one fresh learner per agent for ``config``."""
    name = name.lower()
    if name == "ftdl":
        return lambda: FTDL(config.domain, **kwargs)
    if name == "aftdl":
        return lambda: AFTDL(config.domain, config.strong_convexity, **kwargs)
    if name == "dda":
        if G is None:
            raise ValueError("dda needs the gradient bound G")
        return lambda: DDA(config.domain, G, config.max_delay)
    raise ValueError(f"unknown learner {name!r}; choose from {sorted(LEARNERS)}")
