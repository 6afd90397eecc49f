"""Tabular R-learning admission controller.

The controller sees the vector of per-node queue lengths when a job arrives
and either accepts or rejects it. Rewards depend on whether the job's
end-to-end delay (real for accepted jobs, measured in a shadow copy for
rejected ones) stays below the deadline, with a Lagrange multiplier pricing
the delay-violation constraint:

    accept, on time  ->  eps_ub * lam
    accept, late     -> -(1 - eps_ub) * lam
    reject, on time  -> -1
    reject, late     ->  0

An accepted job's reward only exists once the job leaves the network, so
its (state, action, next state) tuple waits in :class:`ExperienceBuffer`
until then.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

ACCEPT = 0
REJECT = 1
ACTION_NAMES = ("A", "R")


class ContractError(RuntimeError):
    pass


class QTableParseError(ValueError):
    pass


@dataclass(frozen=True)
class RewardParams:
    lam: float
    eps_ub: float
    d_ub: float

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        if not 0 < self.eps_ub < 1:
            raise ValueError(f"eps_ub must lie in (0, 1), got {self.eps_ub!r}")
        if not self.d_ub > 0:
            raise ValueError(f"d_ub must be positive, got {self.d_ub!r}")

    @property
    def r1A(self) -> float:
        return self.eps_ub * self.lam

    @property
    def r2A(self) -> float:
        return -(1 - self.eps_ub) * self.lam

    @property
    def r1R(self) -> float:
        return -1.0

    @property
    def r2R(self) -> float:
        return 0.0

    def table(self) -> tuple:
        return (self.r1A, self.r2A, self.r1R, self.r2R)


def reward(action: int, delay: Optional[float], params: RewardParams) -> float:
    """Immediate reward; ``delay == d_ub`` counts as late."""
    if delay is None:
        raise ContractError("reward needs the job's end-to-end delay")
    on_time = delay < params.d_ub
    if action == ACCEPT:
        return params.r1A if on_time else params.r2A
    return params.r1R if on_time else params.r2R


@dataclass
class AgentConfig:
    alpha: float = 0.01
    beta: float = 0.001
    eps_start: float = 0.3
    eps_end: float = 0.01
    decay_steps: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if not 0 <= self.beta <= 1:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta!r}")
        if not 1 >= self.eps_start >= self.eps_end >= 0:
            raise ValueError("need 1 >= eps_start >= eps_end >= 0")
        if self.decay_steps is not None and self.decay_steps < 0:
            raise ValueError("decay_steps must be non-negative")

    def epsilon(self, step: int) -> float:
        """Linear decay from eps_start to eps_end over decay_steps, then flat."""
        if self.decay_steps is None or step >= self.decay_steps:
            return self.eps_end
        return self.eps_start + (self.eps_end - self.eps_start) * step / self.decay_steps


class QTable:
    """Differential action values, created lazily with value 0."""

    def __init__(self):
        self.values: dict = {}

    def __len__(self):
        return len(self.values)

    def __contains__(self, state):
        return state in self.values

    def row(self, state) -> list:
        r = self.values.get(state)
        if r is None:
            r = self.values[state] = [0.0, 0.0]
        return r

    def get(self, state, action: int) -> float:
        r = self.values.get(state)
        return 0.0 if r is None else r[action]

    def set(self, state, action: int, value: float) -> None:
        self.row(state)[action] = value

    def max(self, state) -> float:
        r = self.values.get(state)
        if r is None:
            return 0.0
        return r[0] if r[0] >= r[1] else r[1]

    def greedy(self, state) -> int:
        """Argmax action; ties go to ACCEPT."""
        r = self.values.get(state)
        if r is None or r[0] >= r[1]:
            return ACCEPT
        return REJECT

    def dimension(self) -> Optional[int]:
        for s in self.values:
            return len(s)
        return None

    def dump(self, fh) -> None:
        fh.write("state\taction\tvalue\n")
        for s in sorted(self.values):
            r = self.values[s]
            key = ",".join(str(x) for x in s)
            for a in (ACCEPT, REJECT):
                fh.write(f"{key}\t{ACTION_NAMES[a]}\t{r[a]!r}\n")

    @classmethod
    def load(cls, fh) -> "QTable":
        q = cls()
        dim = None
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if lineno == 1 and line.startswith("state"):
                continue
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise QTableParseError(f"row {lineno}: expected 3 tab-separated fields")
            try:
                state = tuple(int(x) for x in parts[0].split(","))
                value = float(parts[2])
            except ValueError:
                raise QTableParseError(f"row {lineno}: malformed state or value") from None
            if parts[1] not in ACTION_NAMES:
                raise QTableParseError(f"row {lineno}: unknown action {parts[1]!r}")
            if any(x < 0 for x in state) or not math.isfinite(value):
                raise QTableParseError(f"row {lineno}: negative queue length or non-finite value")
            if dim is None:
                dim = len(state)
            elif len(state) != dim:
                raise QTableParseError(f"row {lineno}: state has {len(state)} entries, expected {dim}")
            q.set(state, ACTION_NAMES.index(parts[1]), value)
        return q


@dataclass
class AverageRewardEstimate:
    r_bar: float = 0.0


@dataclass(slots=True)
class PendingExperience:
    job_id: int
    s: tuple
    a: int
    s_next: tuple
    greedy: bool


@dataclass(slots=True)
class CompletedExperience:
    job_id: int
    s: tuple
    a: int
    s_next: tuple
    greedy: bool
    r: float


class ExperienceBuffer:
    """Incomplete experiences keyed by job id, waiting for their reward."""

    def __init__(self):
        self._pending: dict = {}

    def __len__(self):
        return len(self._pending)

    def __contains__(self, job_id):
        return job_id in self._pending

    def record_pending(self, job_id: int, s: tuple, a: int, s_next: tuple, greedy: bool) -> None:
        if job_id in self._pending:
            raise ContractError(f"job {job_id} already has a pending experience")
        self._pending[job_id] = PendingExperience(job_id, s, a, s_next, greedy)

    def complete(self, job_id: int, r: float) -> CompletedExperience:
        p = self._pending.pop(job_id, None)
        if p is None:
            raise ContractError(f"no pending experience for job {job_id}")
        return CompletedExperience(p.job_id, p.s, p.a, p.s_next, p.greedy, r)


def select_action(state, q: QTable, cfg: AgentConfig, stream, step: int):
    """Epsilon-greedy choice. Returns ``(action, greedy_flag)``.

    One uniform draw per call: below epsilon it also picks the random action.
    """
    eps = cfg.epsilon(step)
    u = stream.uniform()
    if u < eps:
        return (ACCEPT if u < 0.5 * eps else REJECT), False
    return q.greedy(state), True


def td_error(exp: CompletedExperience, q: QTable, r_bar: float) -> float:
    return exp.r - r_bar + q.max(exp.s_next) - q.get(exp.s, exp.a)


def apply_update(exp: CompletedExperience, q: QTable, est: AverageRewardEstimate,
                 cfg: AgentConfig) -> float:
    """R-learning step. Q always moves; r_bar only for greedy decisions."""
    delta = td_error(exp, q, est.r_bar)
    if cfg.alpha:
        row = q.row(exp.s)
        row[exp.a] += cfg.alpha * delta
    if exp.greedy and cfg.beta:
        est.r_bar += cfg.beta * delta
    return delta
