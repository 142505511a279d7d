import numpy as np
import pytest

from delayed_oco.core import (
    ActivationPolicy,
    AgentState,
    BallDomain,
    DelaySchedule,
    RunConfig,
    activation_sequence,
    delivery_round,
    generate_delay_schedule,
)


def config(**kw):
    base = dict(num_agents=2, horizon=50, max_delay=5, strong_convexity=0.1, domain=BallDomain(3, 1.0), seed=7)
    base.update(kw)
    return RunConfig(**base)


def test_ball_domain_basics():
    dom = BallDomain(3, 2.0)
    assert dom.diameter == 4.0
    assert dom.contains(dom.origin())
    assert dom.contains(np.array([2.0, 0, 0]))
    assert not dom.contains(np.array([2.1, 0, 0]))
    with pytest.raises(ValueError):
        BallDomain(0, 1.0)
    with pytest.raises(ValueError):
        BallDomain(2, -1.0)


@pytest.mark.parametrize(
    "kw",
    [
        {"max_delay": 0},
        {"strong_convexity": 0.0},
        {"num_agents": 0},
        {"activation_policy": "explicit"},
        {"activation_policy": "explicit", "activation": (1, 2)},
        {"activation_policy": "explicit", "activation": (3,) * 50},
    ],
)
def test_run_config_rejects_invalid(kw):
    with pytest.raises(ValueError):
        config(**kw)


def test_unit_max_delay_gives_all_ones():
    sched = generate_delay_schedule(config(max_delay=1, horizon=200, num_agents=3))
    assert np.all(sched.delays == 1)


def test_schedule_is_deterministic_per_seed():
    a = generate_delay_schedule(config(seed=123))
    b = generate_delay_schedule(config(seed=123))
    c = generate_delay_schedule(config(seed=124))
    assert np.array_equal(a.delays, b.delays)
    assert a.digest() == b.digest()
    assert not np.array_equal(a.delays, c.delays)


def test_schedule_mean_matches_uniform_expectation():
    sched = generate_delay_schedule(config(max_delay=100, horizon=8000, num_agents=2, seed=0))
    assert sched.delays.min() >= 1 and sched.delays.max() <= 100
    # E = 50.5 for uniform{1..100}
    assert 48 <= sched.delays.mean() <= 53
    counts = np.bincount(sched.delays.ravel(), minlength=101)[1:]
    assert counts.min() > 0


def test_schedule_validates_range():
    with pytest.raises(ValueError):
        DelaySchedule(np.array([[0, 1]]), 3)
    with pytest.raises(ValueError):
        DelaySchedule(np.array([[4, 1]]), 3)


def test_delivery_round_examples():
    delays = np.ones((10, 2), dtype=int)
    delays[4, 0] = 3
    delays[2, 1] = 6
    sched = DelaySchedule(delays, 6)
    assert delivery_round(5, 1, sched) == 7
    assert delivery_round(1, 1, sched) == 1  # d = 1 -> end of the same round
    assert delivery_round(3, 2, sched) == 3 + 6 - 1
    with pytest.raises(IndexError):
        delivery_round(11, 1, sched)
    with pytest.raises(IndexError):
        delivery_round(1, 3, sched)


def test_schedule_csv_roundtrip(tmp_path):
    sched = generate_delay_schedule(config(horizon=30, num_agents=3, max_delay=9))
    path = tmp_path / "delays.csv"
    sched.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,agent,delay"
    back = DelaySchedule.from_csv(path, max_delay=9)
    assert back == sched


def test_activation_policies():
    rr = activation_sequence(config(num_agents=3, horizon=7))
    assert rr.tolist() == [1, 2, 3, 1, 2, 3, 1]
    rnd = activation_sequence(config(num_agents=4, horizon=500, activation_policy=ActivationPolicy.UNIFORM_RANDOM))
    assert set(rnd.tolist()) == {1, 2, 3, 4}
    seq = tuple([2, 1] * 25)
    ex = activation_sequence(config(activation_policy="explicit", activation=seq))
    assert tuple(ex.tolist()) == seq


def test_agent_state_prefix_tracking():
    st = AgentState(1)
    for s in (3, 1, 5, 2):
        st.receive(s)
    assert st.prefix == 3 and st.latest == 5 and len(st) == 4
    st.receive(4)
    assert st.prefix == 5
    with pytest.raises(RuntimeError):
        st.receive(4)
