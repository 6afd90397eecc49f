import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qadmit.agent import (
    ACCEPT,
    REJECT,
    AgentConfig,
    AverageRewardEstimate,
    CompletedExperience,
    ContractError,
    ExperienceBuffer,
    QTable,
    QTableParseError,
    RewardParams,
    apply_update,
    reward,
    select_action,
    td_error,
)
from qadmit.harness import RunConfig, train
from qadmit.sim import NodeSpec, Topology
from qadmit.stochastic import RngStream, gamma_from_rate_scv

P = RewardParams(lam=8, eps_ub=0.1, d_ub=15)


@pytest.mark.parametrize("action,delay,expected", [
    (ACCEPT, 10, 0.8), (ACCEPT, 20, -7.2), (REJECT, 10, -1.0), (REJECT, 20, 0.0),
    (ACCEPT, 15, -7.2), (REJECT, 15, 0.0),
])
def test_reward_table(action, delay, expected):
    assert reward(action, delay, P) == pytest.approx(expected, abs=1e-12)


def test_reward_needs_delay():
    with pytest.raises(ContractError):
        reward(ACCEPT, None, P)


@settings(max_examples=100)
@given(lam=st.floats(0, 1e4), eps=st.floats(1e-6, 1 - 1e-6), d=st.floats(0, 100))
def test_reward_image(lam, eps, d):
    p = RewardParams(lam, eps, 15.0)
    assert p.r1A >= 0 >= p.r2A and p.r1R == -1 and p.r2R == 0
    for a in (ACCEPT, REJECT):
        assert reward(a, d, p) in p.table()
    if lam == 0:
        assert p.r1A == 0 and p.r2A == 0


@pytest.mark.parametrize("kw", [dict(lam=-1, eps_ub=0.1, d_ub=1), dict(lam=1, eps_ub=0, d_ub=1),
                                dict(lam=1, eps_ub=1, d_ub=1), dict(lam=1, eps_ub=0.1, d_ub=0)])
def test_reward_params_validation(kw):
    with pytest.raises(ValueError):
        RewardParams(**kw)


def test_epsilon_schedule():
    cfg = AgentConfig(eps_start=0.3, eps_end=0.01, decay_steps=100)
    assert cfg.epsilon(0) == 0.3
    assert cfg.epsilon(50) == pytest.approx(0.155)
    assert cfg.epsilon(100) == cfg.epsilon(10**6) == 0.01
    with pytest.raises(ValueError):
        AgentConfig(eps_start=0.1, eps_end=0.2)


def test_greedy_selection():
    q = QTable()
    cfg = AgentConfig(eps_start=0, eps_end=0)
    s = (1, 0)
    stream = RngStream(0, "agent")
    assert select_action(s, q, cfg, stream, 0) == (ACCEPT, True)  # tie
    q.set(s, ACCEPT, 1.0)
    assert select_action(s, q, cfg, stream, 0) == (ACCEPT, True)
    q.set(s, REJECT, 2.0)
    assert select_action(s, q, cfg, stream, 0) == (REJECT, True)


def test_full_exploration_is_fair():
    q = QTable()
    q.set((0,), REJECT, 5.0)
    cfg = AgentConfig(eps_start=1, eps_end=1)
    stream = RngStream(3, "agent")
    picks = [select_action((0,), q, cfg, stream, 0) for _ in range(10000)]
    assert not any(g for _, g in picks)
    assert sum(a == ACCEPT for a, _ in picks) / 10000 == pytest.approx(0.5, abs=0.02)


def exp(s=(0,), a=ACCEPT, s2=(1,), r=0.0, greedy=True):
    return CompletedExperience(0, s, a, s2, greedy, r)


def test_td_error_examples():
    q = QTable()
    assert td_error(exp(r=1.0), q, 0.0) == 1.0
    q.set((0,), ACCEPT, 2.0)
    q.set((1,), REJECT, 3.0)
    assert td_error(exp(r=0.5), q, 0.2) == pytest.approx(1.3)
    q.set((1,), REJECT, 2.0)
    assert td_error(exp(r=0.7), q, 0.7) == 0.0


def test_apply_update():
    q, est = QTable(), AverageRewardEstimate()
    apply_update(exp(r=1.0), q, est, AgentConfig(alpha=0.1, beta=0.01))
    assert q.get((0,), ACCEPT) == pytest.approx(0.1)
    assert est.r_bar == pytest.approx(0.01)


def test_non_greedy_keeps_r_bar():
    q, est = QTable(), AverageRewardEstimate(0.25)
    apply_update(exp(r=-7.2, greedy=False), q, est, AgentConfig(alpha=0.5, beta=0.5))
    assert est.r_bar == 0.25
    assert q.get((0,), ACCEPT) == pytest.approx(0.5 * (-7.2 - 0.25))


def test_zero_rates_noop():
    q, est = QTable(), AverageRewardEstimate(0.3)
    q.set((0,), ACCEPT, 1.5)
    before = dict((k, list(v)) for k, v in q.values.items())
    apply_update(exp(r=4.0), q, est, AgentConfig(alpha=0, beta=0))
    assert q.values == before and est.r_bar == 0.3


def test_buffer():
    buf = ExperienceBuffer()
    buf.record_pending(7, (1, 0), ACCEPT, (2, 0), True)
    with pytest.raises(ContractError):
        buf.record_pending(7, (1, 0), ACCEPT, (2, 0), True)
    done = buf.complete(7, 0.8)
    assert (done.s, done.a, done.s_next, done.greedy, done.r) == ((1, 0), ACCEPT, (2, 0), True, 0.8)
    assert len(buf) == 0
    with pytest.raises(ContractError):
        buf.complete(7, 0.8)
    with pytest.raises(ContractError):
        buf.complete(99, 0.0)


def test_qtable_roundtrip():
    q = QTable()
    q.set((0, 1, 2), ACCEPT, 0.1 + 0.2)
    q.set((10, 0, 3), REJECT, -1e-17)
    q.set((3, 3, 3), ACCEPT, 12345.678)
    buf = io.StringIO()
    q.dump(buf)
    back = QTable.load(io.StringIO(buf.getvalue()))
    assert back.values == q.values


@pytest.mark.parametrize("body,row", [
    ("0,1\tA\t1.0\n0,x\tA\t2.0\n", 3),
    ("0,1\tA\t1.0\n0,1\tB\t2.0\n", 3),
    ("0,1\tA\n", 2),
    ("0,1\tA\t1.0\n0,1,2\tR\t2.0\n", 3),
    ("0,1\tA\tnan\n", 2),
    ("-1,1\tA\t0\n", 2),
])
def test_qtable_parse_errors(body, row):
    with pytest.raises(QTableParseError, match=f"row {row}"):
        QTable.load(io.StringIO("state\taction\tvalue\n" + body))


def test_lambda_zero_accepts_everywhere():
    # accepting is never worse than rejecting when lam = 0
    topo = Topology((NodeSpec(1, 1.0, 1.0),))
    cfg = RunConfig(topo, gamma_from_rate_scv(0.5, 1.0), RewardParams(0, 0.1, 15), steps=60000)
    for seed in (0, 1):
        res = train(cfg, seed)
        frequent = [s for s, n in res.visits.items() if n >= 100]
        assert len(frequent) >= 5
        assert all(res.qtable.greedy(s) == ACCEPT for s in frequent)


def test_rewards_within_table():
    topo = Topology.tandem([3, 5, 2], [0.33, 0.2, 0.5], 0.8)
    cfg = RunConfig(topo, gamma_from_rate_scv(0.95, 0.7), P, steps=20000)
    res = train(cfg, 2)
    assert min(P.table()) <= res.r_bar <= max(P.table())
    assert all(math.isfinite(v) for row in res.qtable.values.values() for v in row)
