"""Asynchronous multi-agent simulation loop.

Round ``t`` proceeds as:

1. deliver every message scheduled for the end of round ``t - 1``;
2. activate one agent; its received set at this moment is ``F_t``;
3. the agent decides ``x_t`` and suffers ``f_t(x_t)``;
4. round ``t``'s feedback is queued for each agent ``j`` at ``t + d_{t,j} - 1``.

Messages due after the horizon are still delivered (and counted) once the
loop ends; they affect no decision.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from delayed_oco.core import (
    AgentState,
    DelaySchedule,
    FeedbackMessage,
    FeedbackMode,
    RunConfig,
    RunTrace,
    activation_sequence,
    generate_delay_schedule,
)
from delayed_oco.learners import Learner
from delayed_oco.losses import surrogate_vector

__all__ = ["PendingDelivery", "SimulationEngine", "feedback_for_mode", "run_simulation"]

Observer = Callable[[int, AgentState, np.ndarray], None]


@dataclass(frozen=True)
class PendingDelivery:
    deliver_at: int
    origin: int
    target: int
    message: FeedbackMessage


def feedback_for_mode(mode: FeedbackMode, loss_t, x_t: np.ndarray, grad_t: np.ndarray, lam: float, origin: int = 0) -> FeedbackMessage:
    mode = FeedbackMode(mode)
    if mode is FeedbackMode.FULL_LOSS:
        payload = loss_t
    elif mode is FeedbackMode.SURROGATE:
        payload = surrogate_vector(grad_t, x_t, lam)
        payload.setflags(write=False)
    else:
        payload = np.array(grad_t, dtype=float)
        payload.setflags(write=False)
    return FeedbackMessage(origin, mode, payload)


@dataclass
class SimulationEngine:
    """One deterministic run: config, delays, losses and a learner per agent.

    ``observer(t, agent_state, x_t)`` is called right after each decision,
    with the active agent's state still frozen at ``F_t``. When
    ``record_aggregates`` is set, rows ``(round, agent, sum_norm, count)`` of
    the active learner are collected in :attr:`aggregates`.
    """

    config: RunConfig
    losses: Sequence[Any]
    learner_factory: Callable[[], Learner]
    schedule: DelaySchedule | None = None
    observer: Observer | None = None
    record_aggregates: bool = False
    aggregates: list[tuple[int, int, float, int]] = field(default_factory=list, init=False)

    def __post_init__(self) -> None:
        if self.schedule is None:
            self.schedule = generate_delay_schedule(self.config)
        if len(self.losses) != self.config.horizon:
            raise ValueError(f"loss sequence has length {len(self.losses)}, expected T={self.config.horizon}")
        if self.schedule.delays.shape != (self.config.horizon, self.config.num_agents):
            raise ValueError("delay schedule shape does not match (T, M)")
        if self.schedule.max_delay > self.config.max_delay:
            raise ValueError("delay schedule exceeds the configured max delay")

    def run(self) -> RunTrace:
        cfg = self.config
        T, M, n = cfg.horizon, cfg.num_agents, cfg.dimension
        lam = cfg.strong_convexity
        mode = cfg.feedback_mode
        delays = self.schedule.delays
        active = activation_sequence(cfg)

        learners = [self.learner_factory() for _ in range(M)]
        for lrn in learners:
            if lrn.mode is not mode:
                raise ValueError(f"learner {lrn.name} needs {lrn.mode.value} feedback, run is {mode.value}")
        states = [AgentState(i + 1) for i in range(M)]
        # buckets[r] holds deliveries due at the end of round r, appended in
        # (origin, target) order, which is the required tie-break order
        horizon_end = T + cfg.max_delay
        buckets: list[list[tuple[int, FeedbackMessage]]] = [[] for _ in range(horizon_end + 1)]
        count_at = np.zeros(T + 1, dtype=np.int64)

        decisions = np.zeros((T, n))
        inst_loss = np.zeros(T)
        fb_count = np.zeros(T, dtype=np.int64)
        fb_prefix = np.zeros(T, dtype=np.int64)
        fb_latest = np.zeros(T, dtype=np.int64)
        seconds = np.zeros(T)
        delivered = payload_vectors = violations = 0

        def deliver(bucket: list[tuple[int, FeedbackMessage]]) -> None:
            nonlocal delivered, payload_vectors
            for target, msg in bucket:
                st = states[target]
                st.receive(msg.origin)
                st.max_origin_count = max(st.max_origin_count, int(count_at[msg.origin]))
                learners[target].receive(msg)
                delivered += 1
                payload_vectors += msg.vector_count
            bucket.clear()

        for t in range(1, T + 1):
            tic = time.perf_counter()
            deliver(buckets[t - 1])
            i = int(active[t - 1]) - 1
            x = learners[i].decide()
            seconds[t - 1] = time.perf_counter() - tic

            st = states[i]
            count_at[t] = len(st)
            fb_count[t - 1] = len(st)
            fb_prefix[t - 1] = st.prefix
            fb_latest[t - 1] = st.latest
            if st.max_origin_count > len(st):
                violations += 1
            if self.observer is not None:
                self.observer(t, st, x)
            if self.record_aggregates:
                self.aggregates.append((t, i + 1, learners[i].aggregate_norm(), learners[i].count))

            loss = self.losses[t - 1]
            decisions[t - 1] = x
            inst_loss[t - 1] = loss.value(x)
            grad = loss.gradient(x) if mode is not FeedbackMode.FULL_LOSS else None
            msg = feedback_for_mode(mode, loss, x, grad, lam, origin=t)
            for j in range(M):
                buckets[t + int(delays[t - 1, j]) - 1].append((j, msg))

        after = delivered
        for r in range(T, horizon_end + 1):
            deliver(buckets[r])
        if delivered != T * M:
            raise RuntimeError(f"delivered {delivered} messages, expected {T * M}")

        return RunTrace(
            active_agent=active.copy(),
            decisions=decisions,
            inst_loss=inst_loss,
            feedback_count=fb_count,
            feedback_prefix=fb_prefix,
            feedback_latest=fb_latest,
            round_seconds=seconds,
            loss_ids=[getattr(loss, "uid", None) for loss in self.losses],
            max_delay=cfg.max_delay,
            delivered=delivered,
            delivered_after_horizon=delivered - after,
            payload_vectors=payload_vectors,
            count_order_violations=violations,
            meta={"schedule_sha256": self.schedule.digest(), "learner": learners[0].name},
        )


def run_simulation(engine: SimulationEngine) -> RunTrace:
    return engine.run()
