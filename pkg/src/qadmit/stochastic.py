"""Random variates for inter-arrival and service durations.

Durations are Gamma distributed and parameterized the way queueing people
usually quote them: by rate (mean = 1/rate) and squared coefficient of
variation (variance / mean**2). A deterministic duration is provided for
hand-traceable tests.

Each :class:`RngStream` is keyed by ``(seed, stream_id)`` so the arrival
process, every node's service process, routing and the shadow network draw
from independent generators. Draws are buffered in blocks; the sequence
depends only on the key and the order of calls.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

_BLOCK = 1024
_TINY = np.finfo(float).tiny


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class GammaSpec:
    rate: float
    scv: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ParameterError(f"gamma rate must be positive, got {self.rate!r}")
        if not (self.scv > 0 and math.isfinite(self.scv)):
            raise ParameterError(f"gamma scv must be positive, got {self.scv!r}")

    @property
    def shape(self) -> float:
        return 1.0 / self.scv

    @property
    def scale(self) -> float:
        return self.scv / self.rate

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def to_dict(self) -> dict:
        return {"kind": "gamma", "rate": self.rate, "scv": self.scv}


@dataclass(frozen=True)
class DeterministicSpec:
    value: float

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ParameterError(f"deterministic value must be positive, got {self.value!r}")

    @property
    def rate(self) -> float:
        return 1.0 / self.value

    @property
    def mean(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"kind": "deterministic", "value": self.value}


DurationSpec = Union[GammaSpec, DeterministicSpec]


def gamma_from_rate_scv(rate: float, scv: float) -> GammaSpec:
    """Gamma duration with mean ``1/rate`` and squared CV ``scv``.

    The induced shape is ``1/scv`` and the scale ``scv/rate``.
    """
    return GammaSpec(float(rate), float(scv))


def spec_from_dict(d: dict) -> DurationSpec:
    kind = d.get("kind", "gamma")
    if kind == "gamma":
        extra = set(d) - {"kind", "rate", "scv"}
        if extra:
            raise ParameterError(f"unknown keys for gamma distribution: {sorted(extra)}")
        if "rate" not in d or "scv" not in d:
            raise ParameterError("gamma distribution needs 'rate' and 'scv'")
        return gamma_from_rate_scv(d["rate"], d["scv"])
    if kind == "deterministic":
        extra = set(d) - {"kind", "value"}
        if extra:
            raise ParameterError(f"unknown keys for deterministic distribution: {sorted(extra)}")
        if "value" not in d:
            raise ParameterError("deterministic distribution needs 'value'")
        return DeterministicSpec(float(d["value"]))
    raise ParameterError(f"unknown distribution kind {kind!r}")


def _stream_key(stream_id: str) -> int:
    digest = hashlib.blake2b(stream_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class _Buffered:
    __slots__ = ("_refill", "_buf", "_i")

    def __init__(self, refill):
        self._refill = refill
        self._buf = []
        self._i = 0

    def __call__(self) -> float:
        i = self._i
        buf = self._buf
        if i >= len(buf):
            buf = self._buf = self._refill()
            i = 0
        self._i = i + 1
        return buf[i]


class RngStream:
    """A seeded generator bound to one labelled purpose."""

    def __init__(self, seed: int, stream_id: str):
        self.seed = int(seed)
        self.stream_id = str(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed & (2**64 - 1),
                                    spawn_key=(_stream_key(self.stream_id),))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._buffers: dict = {}

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id!r})"

    def _draws(self, key, refill) -> "_Buffered":
        draws = self._buffers.get(key)
        if draws is None:
            draws = self._buffers[key] = _Buffered(refill)
        return draws

    def uniform(self) -> float:
        """Uniform draw on [0, 1)."""
        return self.uniforms()()

    def uniforms(self) -> "_Buffered":
        gen = self._gen
        return self._draws("u", lambda: gen.random(_BLOCK).tolist())

    def gamma(self, shape: float, scale: float) -> float:
        return self.gammas(shape, scale)()

    def gammas(self, shape: float, scale: float) -> "_Buffered":
        gen = self._gen

        def refill():
            block = gen.gamma(shape, scale, _BLOCK)
            # shapes far below 1 can underflow to 0.0
            np.maximum(block, _TINY, out=block)
            return block.tolist()
        return self._draws(("g", shape, scale), refill)

    def child(self, suffix: str) -> "RngStream":
        return RngStream(self.seed, f"{self.stream_id}/{suffix}")


def sample(spec: DurationSpec, stream: RngStream) -> float:
    """Draw one strictly positive duration."""
    if isinstance(spec, DeterministicSpec):
        return spec.value
    return stream.gamma(spec.shape, spec.scale)


def sampler(spec: DurationSpec, stream: RngStream):
    """Return a zero-argument callable drawing from ``spec`` on ``stream``."""
    if isinstance(spec, DeterministicSpec):
        value = spec.value
        return lambda: value
    return stream.gammas(spec.shape, spec.scale)
