"""Event-driven simulation of multi-server FCFS queueing networks.

The network is an acyclic graph of nodes, each with ``c_n`` identical
servers. External jobs enter at a single ingress node. A job that finishes
service at a node with several successors picks one at random with the
node's branch probabilities; a job finishing at a node with no successors
leaves the network.

The simulator is stepped one external arrival at a time: between two
consecutive arrivals :meth:`Network.advance_to_next_arrival` processes every
service completion, reports the queue-length vector seen by the arriving job
and the jobs that left the network in between.

Events that share a clock value are ordered completions first (arrivals are
handled after every completion with time <= the arrival time), then by node
index, then by job id.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .stochastic import (
    DeterministicSpec,
    DurationSpec,
    ParameterError,
    RngStream,
    gamma_from_rate_scv,
    sampler,
)

PROB_TOL = 1e-12


class ConfigError(ValueError):
    pass


class QueryError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    servers: int
    rate: float
    scv: float = 1.0

    def service_spec(self) -> DurationSpec:
        # scv == 0 is the deterministic limit
        if self.scv == 0:
            return DeterministicSpec(1.0 / self.rate)
        return gamma_from_rate_scv(self.rate, self.scv)


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    edges: tuple = ()
    branch_probs: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.nodes)
        if n == 0:
            raise ConfigError("topology needs at least one node")
        for i, node in enumerate(self.nodes):
            if not isinstance(node.servers, int) or isinstance(node.servers, bool) or node.servers < 1:
                raise ConfigError(f"node {i}: servers must be a positive integer, got {node.servers!r}")
            if not (node.rate > 0 and math.isfinite(node.rate)):
                raise ConfigError(f"node {i}: service rate must be positive, got {node.rate!r}")
            if not (node.scv >= 0 and math.isfinite(node.scv)):
                raise ConfigError(f"node {i}: service scv must be non-negative, got {node.scv!r}")
        succ = [[] for _ in range(n)]
        pred = [0] * n
        for e in self.edges:
            a, b = e
            if not (0 <= a < n and 0 <= b < n):
                raise ConfigError(f"edge {list(e)} references a missing node")
            if a == b:
                raise ConfigError(f"edge {list(e)} is a self loop")
            if b in succ[a]:
                raise ConfigError(f"duplicate edge {list(e)}")
            succ[a].append(b)
            pred[b] += 1
        sources = [i for i in range(n) if pred[i] == 0]
        if len(sources) != 1:
            raise ConfigError(f"expected exactly one ingress node, found {sources}")
        _check_acyclic(succ)
        reach = {sources[0]}
        stack = [sources[0]]
        while stack:
            for b in succ[stack.pop()]:
                if b not in reach:
                    reach.add(b)
                    stack.append(b)
        if len(reach) != n:
            raise ConfigError(f"nodes {sorted(set(range(n)) - reach)} unreachable from ingress")

        probs = {}
        for key, p in self.branch_probs.items():
            i = int(key)
            if not 0 <= i < n:
                raise ConfigError(f"branch probabilities given for missing node {key}")
            probs[i] = tuple(float(x) for x in p)
        for i in range(n):
            k = len(succ[i])
            if k <= 1:
                if i in probs and probs[i] not in ((), (1.0,)):
                    raise ConfigError(f"node {i}: branch probabilities given but node has {k} successor(s)")
                continue
            if i not in probs:
                raise ConfigError(f"node {i}: {k} successors but no branch probabilities")
            p = probs[i]
            if len(p) != k:
                raise ConfigError(f"node {i}: {len(p)} branch probabilities for {k} successors")
            if any(not (x > 0) for x in p):
                raise ConfigError(f"node {i}: branch probabilities must be positive, got {list(p)}")
            if abs(sum(p) - 1.0) > PROB_TOL:
                raise ConfigError(f"node {i}: branch probabilities sum to {sum(p):.12g}, not 1")
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "branch_probs", probs)
        object.__setattr__(self, "successors", tuple(tuple(s) for s in succ))
        object.__setattr__(self, "ingress", sources[0])
        object.__setattr__(self, "egress", tuple(i for i in range(n) if not succ[i]))

    @property
    def size(self) -> int:
        return len(self.nodes)

    @classmethod
    def tandem(cls, servers, rates, scv=1.0) -> "Topology":
        scvs = scv if isinstance(scv, (list, tuple)) else [scv] * len(servers)
        nodes = tuple(NodeSpec(int(c), float(mu), float(v)) for c, mu, v in zip(servers, rates, scvs))
        edges = tuple((i, i + 1) for i in range(len(nodes) - 1))
        return cls(nodes, edges)

    def depth(self) -> int:
        """Number of nodes on the longest ingress-to-egress path."""
        memo = {}

        def longest(i):
            if i not in memo:
                memo[i] = 1 + max((longest(j) for j in self.successors[i]), default=0)
            return memo[i]
        return longest(self.ingress)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"servers": nd.servers, "rate": nd.rate, "scv": nd.scv} for nd in self.nodes],
            "edges": [list(e) for e in self.edges],
            "branch_probs": {str(k): list(v) for k, v in sorted(self.branch_probs.items())},
        }


def _check_acyclic(succ):
    color = [0] * len(succ)
    for root in range(len(succ)):
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
            elif color[nxt] == 1:
                raise ConfigError(f"topology has a cycle through node {nxt}")
            elif color[nxt] == 0:
                color[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))


def build_topology(config: dict) -> Topology:
    """Validate a topology description (see :meth:`Topology.to_dict`)."""
    if not isinstance(config, dict):
        raise ConfigError("topology must be a mapping")
    extra = set(config) - {"nodes", "edges", "branch_probs"}
    if extra:
        raise ConfigError(f"unknown topology keys: {sorted(extra)}")
    nodes = []
    for i, nd in enumerate(config.get("nodes", [])):
        extra = set(nd) - {"servers", "rate", "scv"}
        if extra:
            raise ConfigError(f"node {i}: unknown keys {sorted(extra)}")
        try:
            nodes.append(NodeSpec(nd["servers"], float(nd["rate"]), float(nd.get("scv", 1.0))))
        except KeyError as exc:
            raise ConfigError(f"node {i}: missing {exc.args[0]!r}") from None
    edges = []
    for e in config.get("edges", []):
        if len(e) != 2:
            raise ConfigError(f"edge {e!r} must be a [from, to] pair")
        edges.append((int(e[0]), int(e[1])))
    return Topology(tuple(nodes), tuple(edges), dict(config.get("branch_probs", {})))


class Job:
    __slots__ = ("id", "arrival_time", "departure_time", "path", "node_entry")

    def __init__(self, id: int, arrival_time: float):
        self.id = id
        self.arrival_time = arrival_time
        self.departure_time = None
        self.path = []
        self.node_entry = arrival_time

    def copy(self) -> "Job":
        j = Job(self.id, self.arrival_time)
        j.departure_time = self.departure_time
        j.path = list(self.path)
        j.node_entry = self.node_entry
        return j


def end_to_end_delay(job: Job) -> float:
    if job.departure_time is None:
        raise QueryError(f"job {job.id} has not left the network")
    return job.departure_time - job.arrival_time


@dataclass
class StepOutcome:
    next_state: tuple
    departed: list
    clock: float


class Network:
    """Simulation state of one queueing network.

    ``stats=True`` additionally accumulates per-node time-integrated number
    in system, node visits and node sojourn times (for Little's law checks).
    ``trace=True`` records ``(clock, kind, node, job_id)`` for every event.
    ``interarrivals`` scripts the external arrival process instead of
    ``arrival``: the first value is the time of the first arrival, and the
    process stops when the sequence runs out.
    """

    def __init__(self, topology: Topology, arrival: Optional[DurationSpec], seed: int = 0, *,
                 first_arrival: Optional[float] = None, trace: bool = False, stats: bool = False,
                 keep_jobs: bool = False, interarrivals=None):
        self.topology = topology
        self.seed = seed
        n = topology.size
        self._servers = [nd.servers for nd in topology.nodes]
        self._succ = topology.successors
        self._cum = {}
        for i, p in topology.branch_probs.items():
            acc, out = 0.0, []
            for x in p:
                acc += x
                out.append(acc)
            self._cum[i] = out
        self._service = [sampler(nd.service_spec(), RngStream(seed, f"service/{i}"))
                         for i, nd in enumerate(topology.nodes)]
        self._route = RngStream(seed, "routing").uniforms()
        self._arrival = sampler(arrival, RngStream(seed, "arrival")) if arrival is not None else None
        if interarrivals is not None:
            it = iter(interarrivals)
            self._arrival = lambda: float(next(it, math.inf))
        self._shadow_streams = None

        self.clock = 0.0
        self.q = [0] * n
        self.busy = [0] * n
        self.waiting = [deque() for _ in range(n)]
        self.heap = []
        self.jobs = {}
        self.next_id = 0
        self.accepted = 0
        self.departed_count = 0
        self.keep_jobs = keep_jobs
        self.finished = []
        if first_arrival is not None:
            self.next_arrival = float(first_arrival)
        elif self._arrival is not None:
            self.next_arrival = self._arrival()
        else:
            self.next_arrival = math.inf

        self.trace = [] if trace else None
        self.stats = stats
        if stats:
            self.area = [0.0] * n
            self._last = [0.0] * n
            self.node_visits = [0] * n
            self.node_sojourn = [0.0] * n

    # observation ---------------------------------------------------------

    def observe_state(self) -> tuple:
        return tuple(self.q)

    def in_system(self) -> int:
        return len(self.jobs)

    # dynamics ------------------------------------------------------------

    def _touch(self, node):
        t = self.clock
        self.area[node] += self.q[node] * (t - self._last[node])
        self._last[node] = t

    def _enter(self, node, job):
        if self.stats:
            self._touch(node)
        job.path.append(node)
        job.node_entry = self.clock
        self.q[node] += 1
        if self.trace is not None:
            self.trace.append((self.clock, "arrive", node, job.id))
        if self.busy[node] < self._servers[node]:
            self._start(node, job.id)
        else:
            self.waiting[node].append(job.id)

    def _start(self, node, job_id):
        self.busy[node] += 1
        heapq.heappush(self.heap, (self.clock + self._service[node](), node, job_id))
        if self.trace is not None:
            self.trace.append((self.clock, "start", node, job_id))

    def _complete(self, node, job_id, departed):
        if self.stats:
            self._touch(node)
        self.q[node] -= 1
        self.busy[node] -= 1
        job = self.jobs[job_id]
        if self.stats:
            self.node_visits[node] += 1
            self.node_sojourn[node] += self.clock - job.node_entry
        if self.trace is not None:
            self.trace.append((self.clock, "finish", node, job_id))
        w = self.waiting[node]
        if w:
            self._start(node, w.popleft())
        succ = self._succ[node]
        if not succ:
            job.departure_time = self.clock
            del self.jobs[job_id]
            self.departed_count += 1
            if self.keep_jobs:
                self.finished.append(job)
            if self.trace is not None:
                self.trace.append((self.clock, "depart", node, job_id))
            departed.append((job_id, self.clock - job.arrival_time))
            return
        if len(succ) == 1:
            nxt = succ[0]
        else:
            u = self._route()
            cum = self._cum[node]
            k = 0
            while k < len(cum) - 1 and u >= cum[k]:
                k += 1
            nxt = succ[k]
        self._enter(nxt, job)

    def inject_job(self) -> int:
        """Admit a new external job at the ingress at the current clock."""
        job = Job(self.next_id, self.clock)
        self.next_id += 1
        self.jobs[job.id] = job
        self.accepted += 1
        self._enter(self.topology.ingress, job)
        return job.id

    def skip_job(self) -> int:
        """Account for a rejected external arrival (consumes a job id)."""
        jid = self.next_id
        self.next_id += 1
        if self.trace is not None:
            self.trace.append((self.clock, "reject", self.topology.ingress, jid))
        return jid

    def run_until(self, t_end: float, departed: list) -> None:
        heap = self.heap
        while heap and heap[0][0] <= t_end:
            t, node, job_id = heapq.heappop(heap)
            self.clock = t
            self._complete(node, job_id, departed)

    def advance_to_next_arrival(self) -> StepOutcome:
        t_next = self.next_arrival
        if t_next == math.inf:
            raise QueryError("network has no external arrival process")
        departed = []
        self.run_until(t_next, departed)
        self.clock = t_next
        self.next_arrival = t_next + self._arrival()
        return StepOutcome(tuple(self.q), departed, t_next)

    def run_until_departed(self, job_id: int) -> float:
        """Process events (no external arrivals) until ``job_id`` leaves."""
        job = self.jobs[job_id]
        heap = self.heap
        sink = []
        while job.departure_time is None:
            t, node, jid = heapq.heappop(heap)
            self.clock = t
            self._complete(node, jid, sink)
        return job.departure_time - job.arrival_time

    def flush_stats(self) -> None:
        if self.stats:
            for i in range(self.topology.size):
                self._touch(i)

    # cloning ---------------------------------------------------------------

    def shadow_streams(self):
        """Service and routing draws reserved for shadow copies of this run."""
        if self._shadow_streams is None:
            self._shadow_streams = (
                [sampler(nd.service_spec(), RngStream(self.seed, f"shadow/service/{i}"))
                 for i, nd in enumerate(self.topology.nodes)],
                RngStream(self.seed, "shadow/routing").uniforms(),
            )
        return self._shadow_streams

    def clone(self, service=None, route=None) -> "Network":
        """Copy the full state; the copy has no external arrivals."""
        c = Network.__new__(Network)
        c.topology = self.topology
        c.seed = self.seed
        c._servers = self._servers
        c._succ = self._succ
        c._cum = self._cum
        c._service = service if service is not None else self._service
        c._route = route if route is not None else self._route
        c._arrival = None
        c._shadow_streams = None
        c.clock = self.clock
        c.q = list(self.q)
        c.busy = list(self.busy)
        c.waiting = [deque(w) for w in self.waiting]
        c.heap = list(self.heap)
        c.jobs = {k: j.copy() for k, j in self.jobs.items()}
        c.next_id = self.next_id
        c.accepted = self.accepted
        c.departed_count = self.departed_count
        c.keep_jobs = False
        c.finished = []
        c.next_arrival = math.inf
        c.trace = None
        c.stats = False
        return c
