"""Domain types shared by the simulator, learners and oracles.

Rounds and agents are 1-based throughout the public API, matching how the
protocol is usually written down (round ``t`` in ``1..T``, agent ``i`` in
``1..M``). Arrays are 0-based internally.
"""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from delayed_oco.rng import make_generator

__all__ = [
    "ActivationPolicy",
    "AgentState",
    "BallDomain",
    "DelaySchedule",
    "FeedbackMessage",
    "FeedbackMode",
    "RunConfig",
    "RunTrace",
    "activation_sequence",
    "delivery_round",
    "generate_delay_schedule",
]


class ActivationPolicy(str, enum.Enum):
    ROUND_ROBIN = "round-robin"
    UNIFORM_RANDOM = "uniform-random"
    EXPLICIT = "explicit"


class FeedbackMode(str, enum.Enum):
    FULL_LOSS = "full-loss"
    SURROGATE = "surrogate-z"
    GRADIENT = "gradient"


@dataclass(frozen=True)
class BallDomain:
    """Euclidean ball ``{x : ||x||_2 <= radius}`` centered at the origin."""

    dimension: int
    radius: float

    def __post_init__(self) -> None:
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"radius must be finite and nonnegative, got {self.radius}")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def origin(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def contains(self, x: np.ndarray, atol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.dimension,) and float(np.linalg.norm(x)) <= self.radius + atol


@dataclass(frozen=True)
class RunConfig:
    num_agents: int
    horizon: int
    max_delay: int
    strong_convexity: float
    domain: BallDomain
    seed: int = 0
    activation_policy: ActivationPolicy = ActivationPolicy.ROUND_ROBIN
    feedback_mode: FeedbackMode = FeedbackMode.SURROGATE
    activation: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "activation_policy", ActivationPolicy(self.activation_policy))
        object.__setattr__(self, "feedback_mode", FeedbackMode(self.feedback_mode))
        if self.num_agents < 1:
            raise ValueError("num_agents must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.max_delay < 1:
            raise ValueError("max_delay must be >= 1")
        if not self.strong_convexity > 0:
            raise ValueError("strong_convexity must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.activation_policy is ActivationPolicy.EXPLICIT:
            if self.activation is None:
                raise ValueError("explicit activation policy needs an activation sequence")
            seq = tuple(int(a) for a in self.activation)
            if len(seq) != self.horizon:
                raise ValueError(f"activation sequence has length {len(seq)}, expected {self.horizon}")
            if any(not 1 <= a <= self.num_agents for a in seq):
                raise ValueError(f"activation entries must lie in [1, {self.num_agents}]")
            object.__setattr__(self, "activation", seq)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def radius(self) -> float:
        return self.domain.radius


@dataclass(frozen=True, eq=False)
class DelaySchedule:
    """``delays[t-1, i-1] = d_{t,i}``: agent ``i`` holds round ``t``'s feedback
    from the end of round ``t + d_{t,i} - 1`` on."""

    delays: np.ndarray
    max_delay: int

    def __post_init__(self) -> None:
        delays = np.array(self.delays, dtype=np.int64)
        if delays.ndim != 2 or delays.size == 0:
            raise ValueError("delays must be a non-empty T x M matrix")
        if self.max_delay < 1:
            raise ValueError("max_delay must be >= 1")
        if delays.min() < 1 or delays.max() > self.max_delay:
            raise ValueError(f"delays must lie in [1, {self.max_delay}]")
        delays.setflags(write=False)
        object.__setattr__(self, "delays", delays)

    @property
    def horizon(self) -> int:
        return self.delays.shape[0]

    @property
    def num_agents(self) -> int:
        return self.delays.shape[1]

    def delay(self, s: int, i: int) -> int:
        self._check(s, i)
        return int(self.delays[s - 1, i - 1])

    def delivery_round(self, s: int, i: int) -> int:
        return delivery_round(s, i, self)

    def _check(self, s: int, i: int) -> None:
        if not 1 <= s <= self.horizon:
            raise IndexError(f"round {s} outside [1, {self.horizon}]")
        if not 1 <= i <= self.num_agents:
            raise IndexError(f"agent {i} outside [1, {self.num_agents}]")

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.delays.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.delays, dtype="<i8").tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DelaySchedule):
            return NotImplemented
        return self.max_delay == other.max_delay and np.array_equal(self.delays, other.delays)

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``t,agent,delay`` (1-based), one per (round, agent)."""
        T, M = self.delays.shape
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "agent", "delay"])
            for t in range(T):
                for i in range(M):
                    writer.writerow([t + 1, i + 1, int(self.delays[t, i])])

    @classmethod
    def from_csv(cls, path: str | Path, max_delay: int | None = None) -> DelaySchedule:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["t", "agent", "delay"]:
                raise ValueError(f"expected header t,agent,delay, got {reader.fieldnames}")
            rows = [(int(r["t"]), int(r["agent"]), int(r["delay"])) for r in reader]
        if not rows:
            raise ValueError(f"{path}: no delay rows")
        T = max(r[0] for r in rows)
        M = max(r[1] for r in rows)
        if len(rows) != T * M:
            raise ValueError(f"{path}: expected {T * M} rows for T={T}, M={M}, got {len(rows)}")
        delays = np.zeros((T, M), dtype=np.int64)
        for t, i, d in rows:
            delays[t - 1, i - 1] = d
        if np.any(delays == 0):
            raise ValueError(f"{path}: missing (t, agent) entries")
        return cls(delays, int(delays.max()) if max_delay is None else max_delay)


def generate_delay_schedule(config: RunConfig) -> DelaySchedule:
    """Draw every ``d_{t,i}`` independently and uniformly from ``{1, ..., d}``."""
    rng = make_generator(config.seed, "delays")
    delays = rng.integers(1, config.max_delay, size=(config.horizon, config.num_agents), endpoint=True)
    return DelaySchedule(delays, config.max_delay)


def delivery_round(s: int, i: int, schedule: DelaySchedule) -> int:
    """Round at whose end agent ``i`` receives the feedback of round ``s``."""
    return s + schedule.delay(s, i) - 1


def activation_sequence(config: RunConfig) -> np.ndarray:
    """1-based active agent for every round under the configured policy."""
    T, M = config.horizon, config.num_agents
    if config.activation_policy is ActivationPolicy.ROUND_ROBIN:
        return np.arange(T, dtype=np.int64) % M + 1
    if config.activation_policy is ActivationPolicy.UNIFORM_RANDOM:
        return make_generator(config.seed, "activation").integers(1, M, size=T, endpoint=True)
    return np.asarray(config.activation, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FeedbackMessage:
    """Feedback of round ``origin``.

    ``payload`` is the loss object itself in full-loss mode and an n-vector
    (surrogate ``z`` or raw gradient) otherwise. One message object is shared
    by every recipient, so a run stores each payload once.
    """

    origin: int
    mode: FeedbackMode
    payload: Any

    @property
    def vector_count(self) -> int:
        """Number of n-vectors that travel with this message."""
        if self.mode is FeedbackMode.FULL_LOSS:
            return self.payload.vector_count
        return 1


@dataclass
class AgentState:
    """Timestamps received by one agent (its ``G_i``).

    ``prefix`` is the largest ``k`` with ``{1..k}`` contained in the set; it
    makes the lower-inclusion check on ``F_t`` O(1) per round.
    """

    agent: int
    received: set[int] = field(default_factory=set)
    prefix: int = 0
    latest: int = 0
    max_origin_count: int = -1

    def receive(self, origin: int) -> None:
        if origin in self.received:
            raise RuntimeError(f"agent {self.agent} received round {origin} twice")
        self.received.add(origin)
        self.latest = max(self.latest, origin)
        while self.prefix + 1 in self.received:
            self.prefix += 1

    def __len__(self) -> int:
        return len(self.received)

    def snapshot(self) -> frozenset[int]:
        return frozenset(self.received)


@dataclass
class RunTrace:
    """Per-round record of one simulation run (all arrays have length T)."""

    active_agent: np.ndarray
    decisions: np.ndarray
    inst_loss: np.ndarray
    feedback_count: np.ndarray
    feedback_prefix: np.ndarray
    feedback_latest: np.ndarray
    round_seconds: np.ndarray
    loss_ids: Sequence[Any] = ()
    max_delay: int = 1
    delivered: int = 0
    delivered_after_horizon: int = 0
    payload_vectors: int = 0
    count_order_violations: int = 0
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.inst_loss)

    @property
    def cumulative_loss(self) -> np.ndarray:
        return np.cumsum(self.inst_loss)

    def check_feedback_window(self) -> None:
        """Raise if any round violates ``{1..t-d} <= F_t <= {1..t-1}``."""
        t = np.arange(1, self.horizon + 1)
        low = np.flatnonzero(self.feedback_prefix < t - self.max_delay)
        high = np.flatnonzero(self.feedback_latest > t - 1)
        if low.size or high.size:
            bad = int(np.concatenate([low, high]).min()) + 1
            raise AssertionError(f"feedback window violated at round {bad}")

    def to_csv(self, path: str | Path) -> None:
        cum = self.cumulative_loss
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "active_agent", "feedback_count", "inst_loss", "cum_loss"])
            for t in range(self.horizon):
                writer.writerow([
                    t + 1,
                    int(self.active_agent[t]),
                    int(self.feedback_count[t]),
                    repr(float(self.inst_loss[t])),
                    repr(float(cum[t])),
                ])

    def decisions_to_csv(self, path: str | Path) -> None:
        np.savetxt(path, self.decisions, delimiter=",", fmt="%.17g")
