"""JSON run-config files.

Layout::

    {
      "topology": {"nodes": [{"servers": 3, "rate": 0.33, "scv": 0.8}, ...],
                   "edges": [[0, 1], ...],
                   "branch_probs": {"0": [0.6667, 0.3333]}},
      "arrival":  {"kind": "gamma", "rate": 0.95, "scv": 0.7},
      "control":  {"lambda": 8, "eps_ub": 0.1, "d_ub": 15},
      "agent":    {"alpha": 0.01, "beta": 0.001, "eps_start": 0.3,
                   "eps_end": 0.01, "decay_steps": null},
      "run":      {"steps": 200000, "warmup": null, "window": 5000, "seeds": [0]}
    }

Node indices are 0-based. Unknown keys are rejected. ``QADMIT_SEED``
(comma-separated integers) replaces ``run.seeds``.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .agent import AgentConfig, RewardParams
from .harness import RunConfig
from .sim import ConfigError, build_topology
from .stochastic import ParameterError, spec_from_dict

SEED_ENV = "QADMIT_SEED"
BUNDLED = ("tandem", "acyclic")

_SECTIONS = {
    "topology": None,
    "arrival": None,
    "control": {"lambda", "eps_ub", "d_ub"},
    "agent": {"alpha", "beta", "eps_start", "eps_end", "decay_steps"},
    "run": {"steps", "warmup", "window", "seeds"},
}


def _line_of(text: str, key: str):
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(msg: str, source: str, text: str, key: str = None):
    line = _line_of(text, key) if key else None
    where = f"{source}:{line}" if line else source
    raise ConfigError(f"{where}: {msg}")


def config_from_dict(data: dict, source: str = "<config>", text: str = "") -> RunConfig:
    if not isinstance(data, dict):
        _fail("top level must be an object", source, text)
    for key in data:
        if key not in _SECTIONS:
            _fail(f"unknown section {key!r}", source, text, key)
    for key in ("topology", "arrival", "control"):
        if key not in data:
            _fail(f"missing section {key!r}", source, text)
    for sec, allowed in _SECTIONS.items():
        if allowed is None or sec not in data:
            continue
        if not isinstance(data[sec], dict):
            _fail(f"section {sec!r} must be an object", source, text, sec)
        for key in data[sec]:
            if key not in allowed:
                _fail(f"unknown key {sec}.{key}", source, text, key)
    try:
        topology = build_topology(data["topology"])
    except (ConfigError, ParameterError, TypeError, ValueError) as exc:
        key = "branch_probs" if "branch" in str(exc) else "topology"
        _fail(f"topology: {exc}", source, text, key)
    try:
        arrival = spec_from_dict(data["arrival"])
    except (ParameterError, TypeError, ValueError) as exc:
        _fail(f"arrival: {exc}", source, text, "arrival")
    ctl = data["control"]
    try:
        reward = RewardParams(float(ctl["lambda"]), float(ctl["eps_ub"]), float(ctl["d_ub"]))
    except KeyError as exc:
        _fail(f"control: missing {exc.args[0]!r}", source, text, "control")
    except (TypeError, ValueError) as exc:
        _fail(f"control: {exc}", source, text, "control")
    try:
        agent = AgentConfig(**data.get("agent", {}))
    except (TypeError, ValueError) as exc:
        _fail(f"agent: {exc}", source, text, "agent")
    run = data.get("run", {})
    try:
        cfg = RunConfig(topology, arrival, reward, agent, **run)
    except (TypeError, ValueError) as exc:
        _fail(f"run: {exc}", source, text, "run")
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    a = cfg.agent
    return {
        "topology": cfg.topology.to_dict(),
        "arrival": cfg.arrival.to_dict(),
        "control": {"lambda": cfg.reward.lam, "eps_ub": cfg.reward.eps_ub, "d_ub": cfg.reward.d_ub},
        "agent": {"alpha": a.alpha, "beta": a.beta, "eps_start": a.eps_start,
                  "eps_end": a.eps_end, "decay_steps": a.decay_steps},
        "run": {"steps": cfg.steps, "warmup": cfg.warmup, "window": cfg.window,
                "seeds": list(cfg.seeds)},
    }


def dumps(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=False) + "\n"


def bundled_path(name: str):
    return resources.files("qadmit").joinpath("configs", f"{name}.config")


def read_text(path) -> tuple:
    """Return ``(text, source)``; bare bundled names resolve to package data."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        res = bundled_path(str(path))
        return res.read_text(), f"{path}.config"
    return p.read_text(), str(path)


def loads(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(data, source, text)


def load(path, *, env=None) -> RunConfig:
    """Load and validate a config file, applying ``QADMIT_SEED`` if set."""
    text, source = read_text(path)
    cfg = loads(text, source)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        cfg = replace(cfg, seeds=parse_seeds(env[SEED_ENV]))
    return cfg


def parse_seeds(text: str) -> tuple:
    try:
        seeds = tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None
    if not seeds:
        raise ConfigError("empty seed list")
    return seeds
