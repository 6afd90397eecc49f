"""Command-line front end.

    qadmit train    --config tandem --out runs/tandem
    qadmit sweep    --config tandem --lambdas 0,2,4,6,8,10,12 --out runs/sweep
    qadmit baseline --config acyclic --out runs/noac
    qadmit evaluate --qtable runs/tandem/qtable.txt --config tandem
    qadmit simulate --config tandem --steps 10000 --out runs/sim --trace

Exit status: 0 success, 1 validation or usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace

from . import config as cfgio
from .agent import QTable, QTableParseError
from .harness import (
    METRIC_FIELDS,
    aggregate_final,
    baseline_no_ac,
    evaluate,
    lambda_sweep,
    train,
)
from .sim import ConfigError, Network

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

METRICS_COLUMNS = ("step",) + METRIC_FIELDS + ("seed",)
SWEEP_COLUMNS = ("lambda", "g_tilde", "p_violation_accept", "objective", "acceptance_rate",
                 "throughput", "goodput", "seeds")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _write(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def metrics_csv(results) -> str:
    rows = []
    for res in sorted(results, key=lambda r: r.seed):
        for rec in res.metrics:
            rows.append({c: getattr(rec, c) for c in METRICS_COLUMNS})
    return _csv(rows, METRICS_COLUMNS)


def _final(res) -> dict:
    f = res.metrics.final()
    out = {name: getattr(f, name) for name in METRIC_FIELDS}
    out.update(seed=res.seed, g_tilde=res.g_tilde, mean_reward=res.mean_reward,
               states_seen=len(res.visits), unvisited_decisions=res.unvisited_decisions)
    return out


def summary(results) -> dict:
    return {"per_seed": [_final(r) for r in sorted(results, key=lambda r: r.seed)],
            "aggregate": aggregate_final(results)}


def _load(args):
    cfg = cfgio.load(args.config)
    if getattr(args, "seeds", None):
        cfg = replace(cfg, seeds=cfgio.parse_seeds(args.seeds))
    if getattr(args, "steps", None):
        steps = args.steps
        warmup = None if cfg.warmup is None else min(cfg.warmup, steps // 10)
        cfg = replace(cfg, steps=steps, warmup=warmup, window=min(cfg.window, max(100, steps // 10)))
    return cfg


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _outdir(args.out)
    results = [train(cfg, s) for s in cfg.seeds]
    _write(os.path.join(out, "metrics.csv"), metrics_csv(results))
    for i, res in enumerate(results):
        name = "qtable.txt" if i == 0 else f"qtable_seed{res.seed}.txt"
        buf = io.StringIO()
        res.qtable.dump(buf)
        _write(os.path.join(out, name), buf.getvalue())
    _write(os.path.join(out, "summary.json"), _json(summary(results)))
    agg = aggregate_final(results)
    print(f"P(d>d_ub|A)={agg['p_violation_accept']:.4f} acceptance={agg['acceptance_rate']:.4f} "
          f"goodput={agg['goodput']:.4f}")
    return EXIT_OK


def parse_lambdas(text: str) -> list:
    if text is None or not text.strip():
        raise UsageError("--lambdas needs at least one value")
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--lambdas: cannot parse {text!r}") from None
    if not grid:
        raise UsageError("--lambdas needs at least one value")
    if any(x < 0 for x in grid):
        raise UsageError("--lambdas values must be >= 0")
    return grid


def cmd_sweep(args) -> int:
    grid = parse_lambdas(args.lambdas)
    cfg = _load(args)
    out = _outdir(args.out)
    res = lambda_sweep(cfg, grid, workers=args.workers)
    rows = []
    for r in sorted(res.records, key=lambda r: (r.lam, r.seed)):
        row = {c: getattr(r, c) for c in SWEEP_COLUMNS if c not in ("lambda", "seeds")}
        row.update({"lambda": r.lam, "seeds": str(r.seed)})
        rows.append(row)
    for agg in res.aggregate():
        row = {c: agg[c] for c in SWEEP_COLUMNS if c != "seeds"}
        row["seeds"] = "mean(" + " ".join(str(s) for s in cfg.seeds) + ")"
        rows.append(row)
    _write(os.path.join(out, "sweep.csv"), _csv(rows, SWEEP_COLUMNS))
    best = res.best()
    _write(os.path.join(out, "sweep_summary.json"), _json({
        "lambda_star": res.lambda_star,
        "kkt_residual": res.kkt_residual(),
        "at_lambda_star": best,
        "rows": res.aggregate(),
    }))
    print(f"lambda*={fmt(res.lambda_star)} g_tilde={best['g_tilde']:.6g} "
          f"P(d>d_ub|A)={best['p_violation_accept']:.4f} kkt_residual={res.kkt_residual():.4g}"
          + (" (constraint violated)" if best["constraint_violated"] else ""))
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _load(args)
    out = _outdir(args.out)
    results = [baseline_no_ac(cfg, s) for s in cfg.seeds]
    _write(os.path.join(out, "metrics.csv"), metrics_csv(results))
    _write(os.path.join(out, "summary.json"), _json(summary(results)))
    agg = aggregate_final(results)
    print(f"P(d>d_ub|A)={agg['p_violation_accept']:.4f} throughput={agg['throughput']:.4f} "
          f"goodput={agg['goodput']:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    with open(args.qtable) as fh:
        q = QTable.load(fh)
    dim = q.dimension()
    if dim is not None and dim != cfg.topology.size:
        raise ConfigError(f"{args.qtable}: table states have {dim} entries but the topology "
                          f"has {cfg.topology.size} nodes")
    results = [evaluate(q, cfg, s) for s in cfg.seeds]
    unvisited = sum(r.unvisited_decisions for r in results)
    if unvisited:
        print(f"warning: {unvisited} decisions in states missing from the table "
              f"(treated as Q=0, accept)", file=sys.stderr)
    sys.stdout.write(_json(summary(results)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _outdir(args.out)
    seed = cfg.seeds[0]
    net = Network(cfg.topology, cfg.arrival, seed, trace=args.trace, stats=True)
    step = net.advance_to_next_arrival()
    delays = []
    for _ in range(cfg.steps):
        net.inject_job()
        step = net.advance_to_next_arrival()
        delays.extend(d for _, d in step.departed)
    net.flush_stats()
    T = net.clock
    d_ub = cfg.reward.d_ub
    result = {
        "seed": seed,
        "arrivals": cfg.steps,
        "departures": len(delays),
        "clock": T,
        "mean_delay": sum(delays) / len(delays) if delays else 0.0,
        "p_violation": sum(d >= d_ub for d in delays) / len(delays) if delays else 0.0,
        "throughput": len(delays) / T if T > 0 else 0.0,
        "mean_in_system": [a / T for a in net.area] if T > 0 else [0.0] * cfg.topology.size,
    }
    _write(os.path.join(out, "simulate.json"), _json(result))
    if args.trace:
        lines = ["clock,kind,node,job"] + [f"{t!r},{k},{n},{j}" for t, k, n, j in net.trace]
        _write(os.path.join(out, "trace.csv"), "\n".join(lines) + "\n")
    sys.stdout.write(_json(result))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qadmit", description="Queueing network admission control with R-learning.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, out=True):
        sp.add_argument("--config", required=True,
                        help="config file, or 'tandem' / 'acyclic' for the bundled ones")
        sp.add_argument("--seeds", help="comma-separated seeds (overrides config and env)")
        sp.add_argument("--steps", type=int, help="override run.steps")
        if out:
            sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("train", help="train controllers, one per seed")
    common(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("sweep", help="train over a lambda grid and pick the dual minimizer")
    common(sp)
    sp.add_argument("--lambdas", required=True, help="comma-separated lambda grid")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("baseline", help="no admission control")
    common(sp)
    sp.set_defaults(fn=cmd_baseline)

    sp = sub.add_parser("evaluate", help="greedy rollout of a saved Q-table")
    common(sp, out=False)
    sp.add_argument("--qtable", required=True)
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("simulate", help="simulation only, every job accepted")
    common(sp)
    sp.add_argument("--trace", action="store_true", help="write every event to trace.csv")
    sp.set_defaults(fn=cmd_simulate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, QTableParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
