"""Training, evaluation and lambda sweeps for the admission controller.

One time step is the interval between two external arrivals. Per step the
controller observes the queue-length vector, picks an action and the
network advances to the next arrival. Accepted jobs are rewarded when they
leave; rejected jobs are rewarded immediately from a shadow copy of the
network. Metrics are checkpointed every ``window`` steps after warmup.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

from .agent import (
    ACCEPT,
    REJECT,
    AgentConfig,
    AverageRewardEstimate,
    ExperienceBuffer,
    QTable,
    RewardParams,
    apply_update,
    reward,
)
from .shadow import clone_for_shadow, measure_hypothetical_delay
from .sim import Network, Topology
from .stochastic import DurationSpec, RngStream

TAIL_FRACTION = 0.2


@dataclass
class RunConfig:
    topology: Topology
    arrival: Optional[DurationSpec]
    reward: RewardParams
    agent: AgentConfig = field(default_factory=AgentConfig)
    steps: int = 200_000
    warmup: Optional[int] = None
    window: int = 5000
    seeds: tuple = (0,)

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.window < 100:
            raise ValueError(f"window must be >= 100, got {self.window}")
        if not self.steps > self.resolved_warmup() >= 0:
            raise ValueError("need steps > warmup >= 0")

    def resolved_warmup(self) -> int:
        return self.steps // 10 if self.warmup is None else self.warmup

    def resolved_agent(self, seed: int) -> AgentConfig:
        decay = self.steps // 2 if self.agent.decay_steps is None else self.agent.decay_steps
        return replace(self.agent, decay_steps=decay, seed=seed)


@dataclass
class MetricRecord:
    step: int
    p_violation_accept: float
    objective: float
    acceptance_rate: float
    throughput: float
    goodput: float
    r_bar: float
    seed: int


class MetricsSeries(list):
    """Checkpoint records, in step order."""

    def final(self) -> MetricRecord:
        if not self:
            raise ValueError("no checkpoints recorded")
        return self[-1]


@dataclass
class RunResult:
    seed: int
    qtable: QTable
    metrics: MetricsSeries
    r_bar: float
    g_tilde: float
    visits: dict
    mean_reward: float
    rewards_emitted: int
    unvisited_decisions: int = 0
    accepted: int = 0
    departed: int = 0
    in_system: int = 0
    pending: int = 0

    def __iter__(self):
        # allows ``q, metrics = train(cfg)``
        return iter((self.qtable, self.metrics))


class _Window:
    __slots__ = ("steps", "accepts", "rejects_on_time", "departures", "on_time", "t0")

    def __init__(self, t0):
        self.steps = self.accepts = self.rejects_on_time = self.departures = self.on_time = 0
        self.t0 = t0

    def record(self, step, clock, r_bar, seed) -> MetricRecord:
        elapsed = clock - self.t0
        deps = self.departures
        return MetricRecord(
            step=step,
            p_violation_accept=(deps - self.on_time) / deps if deps else 0.0,
            objective=-self.rejects_on_time / self.steps if self.steps else 0.0,
            acceptance_rate=self.accepts / self.steps if self.steps else 0.0,
            throughput=deps / elapsed if elapsed > 0 else 0.0,
            goodput=self.on_time / elapsed if elapsed > 0 else 0.0,
            r_bar=r_bar,
            seed=seed,
        )


def _rollout(cfg: RunConfig, seed: int, q: QTable, *, learn: bool,
             policy: Optional[Callable] = None, trace: bool = False,
             est: Optional[AverageRewardEstimate] = None,
             agent: Optional[AgentConfig] = None) -> RunResult:
    """Algorithm loop shared by training, evaluation and the baseline.

    ``policy`` (state -> action) overrides the epsilon-greedy choice.
    ``learn=False`` disables every Q/r_bar update. When ``agent`` is given it
    is used as-is (epsilon schedule included).
    """
    params = cfg.reward
    agent = agent if agent is not None else cfg.resolved_agent(seed)
    if cfg.arrival is None:
        # no arrival process: nothing ever happens
        empty = MetricsSeries([MetricRecord(cfg.steps, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, seed)])
        return RunResult(seed=seed, qtable=q, metrics=empty, r_bar=0.0, g_tilde=0.0,
                         visits={}, mean_reward=0.0, rewards_emitted=0)
    net = Network(cfg.topology, cfg.arrival, seed, trace=trace)
    uniform = RngStream(seed, "agent").uniforms()
    est = est if est is not None else AverageRewardEstimate()
    buffer = ExperienceBuffer()
    d_ub = params.d_ub
    r_accept = (params.r1A, params.r2A)
    qvals = q.values
    visits: dict = {}
    metrics = MetricsSeries()
    warmup = cfg.resolved_warmup()
    window = cfg.window
    tail_start = cfg.steps - max(1, int(cfg.steps * TAIL_FRACTION))
    tail_sum = 0.0
    reward_sum = 0.0
    reward_count = 0
    unvisited = 0
    eps_start, eps_end = agent.eps_start, agent.eps_end
    decay = agent.decay_steps or 0

    out = net.advance_to_next_arrival()
    s = out.next_state
    win = _Window(net.clock)
    for step in range(cfg.steps):
        visits[s] = visits.get(s, 0) + 1
        if policy is not None:
            a, greedy = policy(s), True
        else:
            eps = eps_start + (eps_end - eps_start) * step / decay if step < decay else eps_end
            u = uniform() if eps > 0 else 1.0
            if u < eps:
                a, greedy = (ACCEPT if u < 0.5 * eps else REJECT), False
            else:
                row = qvals.get(s)
                if row is None:
                    unvisited += 1
                    a = ACCEPT
                else:
                    a = ACCEPT if row[0] >= row[1] else REJECT
                greedy = True

        if a == ACCEPT:
            jid = net.inject_job()
            win.accepts += 1
        else:
            jid = net.skip_job()
            delay = measure_hypothetical_delay(clone_for_shadow(net))
            r_reject = reward(REJECT, delay, params)
            if delay < d_ub:
                win.rejects_on_time += 1

        out = net.advance_to_next_arrival()
        s_next = out.next_state
        buffer.record_pending(jid, s, a, s_next, greedy)

        if a == REJECT:
            exp = buffer.complete(jid, r_reject)
            reward_sum += r_reject
            reward_count += 1
            if learn:
                apply_update(exp, q, est, agent)
        for dj, delay in out.departed:
            ok = delay < d_ub
            r = r_accept[0] if ok else r_accept[1]
            exp = buffer.complete(dj, r)
            reward_sum += r
            reward_count += 1
            win.departures += 1
            if ok:
                win.on_time += 1
            if learn:
                apply_update(exp, q, est, agent)

        s = s_next
        win.steps += 1
        done = step + 1
        if done >= tail_start:
            tail_sum += est.r_bar
        if done == warmup:
            win = _Window(net.clock)
        elif done > warmup and (done - warmup) % window == 0:
            metrics.append(win.record(done, net.clock, est.r_bar, seed))
            win = _Window(net.clock)

    if not metrics or metrics[-1].step != cfg.steps:
        if win.steps:
            metrics.append(win.record(cfg.steps, net.clock, est.r_bar, seed))
    result = RunResult(
        seed=seed, qtable=q, metrics=metrics, r_bar=est.r_bar,
        g_tilde=tail_sum / (cfg.steps - tail_start),
        visits=visits,
        mean_reward=reward_sum / reward_count if reward_count else 0.0,
        rewards_emitted=reward_count,
        unvisited_decisions=unvisited,
        accepted=net.accepted,
        departed=net.departed_count,
        in_system=net.in_system(),
        pending=len(buffer),
    )
    return result


def train(cfg: RunConfig, seed: Optional[int] = None) -> RunResult:
    """Train one controller from scratch (Q and r_bar start at 0)."""
    seed = cfg.seeds[0] if seed is None else seed
    return _rollout(cfg, seed, QTable(), learn=True)


def evaluate(q: QTable, cfg: RunConfig, seed: Optional[int] = None) -> RunResult:
    """Greedy rollout of a frozen table; no learning.

    States missing from the table act as Q = 0 (accept); the number of such
    decisions is reported as ``unvisited_decisions``.
    """
    seed = cfg.seeds[0] if seed is None else seed
    greedy = replace(cfg.resolved_agent(seed), eps_start=0.0, eps_end=0.0)
    return _rollout(cfg, seed, q, learn=False, agent=greedy)


def always(action: int):
    return lambda s: action


def baseline_no_ac(cfg: RunConfig, seed: Optional[int] = None) -> RunResult:
    """Same environment with every arrival accepted."""
    seed = cfg.seeds[0] if seed is None else seed
    return _rollout(cfg, seed, QTable(), learn=False, policy=always(ACCEPT))


def run_policy(cfg: RunConfig, policy: Callable, seed: Optional[int] = None) -> RunResult:
    seed = cfg.seeds[0] if seed is None else seed
    return _rollout(cfg, seed, QTable(), learn=False, policy=policy)


# aggregation -------------------------------------------------------------

METRIC_FIELDS = ("p_violation_accept", "objective", "acceptance_rate", "throughput", "goodput", "r_bar")


def mean_se(values) -> tuple:
    values = list(values)
    m = statistics.fmean(values)
    se = statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return m, se


def aggregate_final(results) -> dict:
    """Mean and standard error of the final-window metrics across seeds."""
    out = {}
    finals = [r.metrics.final() for r in results]
    for name in METRIC_FIELDS:
        m, se = mean_se(getattr(f, name) for f in finals)
        out[name] = m
        out[name + "_se"] = se
    return out


def aggregate_curves(results) -> list:
    """Per-checkpoint mean and standard error across seeds."""
    rows = []
    for recs in zip(*(r.metrics for r in results)):
        row = {"step": recs[0].step}
        for name in METRIC_FIELDS:
            m, se = mean_se(getattr(x, name) for x in recs)
            row[name] = m
            row[name + "_se"] = se
        rows.append(row)
    return rows


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def train_seeds(cfg: RunConfig, workers: int = 1) -> list:
    return _map(train, [(cfg, s) for s in cfg.seeds], workers)


@dataclass
class SweepRecord:
    lam: float
    seed: int
    g_tilde: float
    p_violation_accept: float
    objective: float
    acceptance_rate: float
    throughput: float
    goodput: float


@dataclass
class SweepResult:
    records: list
    eps_ub: float

    def lambdas(self) -> list:
        return sorted({r.lam for r in self.records})

    def aggregate(self) -> list:
        rows = []
        for lam in self.lambdas():
            recs = [r for r in self.records if r.lam == lam]
            row = {"lambda": lam, "seeds": len(recs)}
            for name in ("g_tilde", "p_violation_accept", "objective", "acceptance_rate",
                         "throughput", "goodput"):
                row[name] = statistics.fmean(getattr(r, name) for r in recs)
            row["constraint_violated"] = row["p_violation_accept"] > self.eps_ub
            rows.append(row)
        return rows

    @property
    def lambda_star(self) -> float:
        rows = self.aggregate()
        return min(rows, key=lambda r: (r["g_tilde"], r["lambda"]))["lambda"]

    def best(self) -> dict:
        lam = self.lambda_star
        return next(r for r in self.aggregate() if r["lambda"] == lam)

    def kkt_residual(self) -> float:
        """lambda* * (P(d < d_ub | A) - (1 - eps_ub)); near zero at the optimum."""
        b = self.best()
        return b["lambda"] * ((1.0 - b["p_violation_accept"]) - (1.0 - self.eps_ub))


def _sweep_one(cfg: RunConfig, lam: float, seed: int) -> SweepRecord:
    c = replace(cfg, reward=replace(cfg.reward, lam=float(lam)))
    res = train(c, seed)
    f = res.metrics.final()
    return SweepRecord(lam=float(lam), seed=seed, g_tilde=res.g_tilde,
                       p_violation_accept=f.p_violation_accept, objective=f.objective,
                       acceptance_rate=f.acceptance_rate, throughput=f.throughput,
                       goodput=f.goodput)


def lambda_sweep(cfg: RunConfig, grid, workers: int = 1) -> SweepResult:
    """Train one controller per (lambda, seed); lambda* minimizes mean g_tilde."""
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(x < 0 for x in grid):
        raise ValueError("lambda values must be >= 0")
    jobs = [(cfg, lam, s) for lam in grid for s in cfg.seeds]
    return SweepResult(_map(_sweep_one, jobs, workers), cfg.reward.eps_ub)


def record_dict(rec) -> dict:
    return asdict(rec)
