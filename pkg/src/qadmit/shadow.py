"""Shadow copy of the network used to price rejected jobs.

A rejected job never enters the real network, so its reward is computed by
cloning the network at the arrival instant, sending the job through the
clone and fast-forwarding until it leaves. Jobs already in service keep
their exact completion times; everything not yet drawn (service of waiting
jobs, routing) comes from shadow streams that the real run never touches.
The clone receives no later external arrivals.
"""

from __future__ import annotations

from .agent import REJECT, RewardParams, reward
from .sim import Network


class ShadowSim:
    def __init__(self, net: Network):
        self.net = net

    def observe_state(self) -> tuple:
        return self.net.observe_state()


def clone_for_shadow(real: Network) -> ShadowSim:
    service, route = real.shadow_streams()
    return ShadowSim(real.clone(service=service, route=route))


def measure_hypothetical_delay(shadow: ShadowSim) -> float:
    """End-to-end delay a job arriving now would see, ignoring later arrivals."""
    net = shadow.net
    jid = net.inject_job()
    return net.run_until_departed(jid)


def reward_for_rejection(delay: float, params: RewardParams) -> float:
    return reward(REJECT, delay, params)
