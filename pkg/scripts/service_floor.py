"""Lower bound on P(d >= d_ub | accepted) implied by service times alone.

Every accepted job spends at least the sum of its own service times in the
network, whatever the admission policy does, so no controller can push the
violation probability below P(sum of services >= d_ub). This script
estimates that floor by Monte Carlo for a config, and the smallest deadline
at which the floor drops to eps_ub.

    python scripts/service_floor.py --config tandem
    python scripts/service_floor.py --config acyclic --draws 2000000
"""

import argparse

import numpy as np

from qadmit import config as cfgio
from qadmit.stochastic import DeterministicSpec


def path_service_sums(topology, n, rng):
    """Service-time totals along randomly routed ingress-to-egress paths."""
    total = np.zeros(n)
    node = np.full(n, topology.ingress)
    alive = np.ones(n, bool)
    while alive.any():
        for i in np.unique(node[alive]):
            mask = alive & (node == i)
            spec = topology.nodes[i].service_spec()
            k = int(mask.sum())
            if isinstance(spec, DeterministicSpec):
                total[mask] += spec.value
            else:
                total[mask] += rng.gamma(spec.shape, spec.scale, k)
            succ = topology.successors[i]
            if not succ:
                alive[mask] = False
            elif len(succ) == 1:
                node[mask] = succ[0]
            else:
                node[mask] = rng.choice(succ, size=k, p=topology.branch_probs[i])
    return total


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="tandem")
    ap.add_argument("--draws", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cfg = cfgio.load(args.config, env={})
    s = path_service_sums(cfg.topology, args.draws, np.random.default_rng(args.seed))
    d_ub, eps = cfg.reward.d_ub, cfg.reward.eps_ub
    floor = float((s >= d_ub).mean())
    se = float(np.sqrt(floor * (1 - floor) / len(s)))
    print(f"config            {args.config}")
    print(f"mean service sum  {s.mean():.4f}")
    print(f"floor P(S>=d_ub)  {floor:.4f} +- {se:.4f}   (d_ub={d_ub:g}, eps_ub={eps:g})")
    print(f"feasible?         {'yes' if floor <= eps else 'no'}")
    print(f"d_ub with floor = eps_ub: {np.quantile(s, 1 - eps):.3f}")


if __name__ == "__main__":
    main()
