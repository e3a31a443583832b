"""Synthetic quality traces and ground-truth datasets.

Target traces are piecewise constant: segment durations are drawn uniformly
from a small integer set and segment levels from a normal distribution
truncated to a quality band. Ground-truth datasets push those targets through
a known model and add Gaussian measurement noise.

Random numbers come from :class:`SplitMix64`, a 64-bit counter-based
generator, so that a seed reproduces the same streams in any language:

* state update ``s += 0x9E3779B97F4A7C15`` (mod 2**64), output
  ``mix64(s)`` where ``mix64(z)`` is ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
  z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`` (all mod 2**64);
* ``uniform() = (next() >> 11) * 2**-53`` in ``[0, 1)``;
* ``choice(k) = floor(uniform() * k)``;
* ``normal()`` uses the Marsaglia polar method: draw ``x = 2 uniform() - 1``
  then ``y = 2 uniform() - 1`` until ``0 < s = x*x + y*y < 1``; with
  ``m = sqrt(-2 ln s / s)`` return ``x m`` now and ``y m`` on the next call;
* the stream for trace ``i`` of a dataset is seeded with
  ``substream_seed(seed, i) = mix64(seed ^ mix64(i + 0x9E3779B97F4A7C15))``.

A target consumes its stream in a fixed order: every segment duration first,
then one truncated-normal level per segment. Measurement noise for a trace
uses the separate stream ``substream_seed(substream_seed(seed, i), 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import TrainingDataset
from .errors import ContractError, StabilityError
from .model import HWParams, simulate

__all__ = [
    "SplitMix64",
    "mix64",
    "substream_seed",
    "TargetSpec",
    "GroundTruthSpec",
    "GroundTruth",
    "sample_durations",
    "sample_qualities",
    "build_target",
    "generate_ground_truth",
    "burn_in_length",
]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def substream_seed(seed: int, index: int) -> int:
    return mix64((seed & _MASK) ^ mix64(index + _GOLDEN))


class SplitMix64:
    """Portable seedable generator; see the module docstring for the exact recipe."""

    def __init__(self, seed: int):
        self.state = seed & _MASK
        self._spare = None

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return mix64(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def choice(self, k: int) -> int:
        return int(self.uniform() * k)

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        while True:
            x = 2.0 * self.uniform() - 1.0
            y = 2.0 * self.uniform() - 1.0
            s = x * x + y * y
            if 0.0 < s < 1.0:
                break
        m = math.sqrt(-2.0 * math.log(s) / s)
        self._spare = y * m
        return x * m

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)])


@dataclass(frozen=True)
class TargetSpec:
    duration_set: tuple = (4, 5, 6, 7, 8, 9, 10)
    quality_mean: float = 50.0
    quality_std: float = 10.0
    quality_bounds: tuple = (30.0, 70.0)
    total_len: int = 300
    seed: int = 0

    def __post_init__(self):
        durations = tuple(int(d) for d in self.duration_set)
        if not durations or min(durations) < 1:
            raise ContractError("segment durations must be positive integers")
        lo, hi = (float(x) for x in self.quality_bounds)
        if not 0.0 <= lo < hi <= 100.0:
            raise ContractError("quality bounds must satisfy 0 <= low < high <= 100")
        if not lo <= self.quality_mean <= hi:
            raise ContractError("quality mean must lie within the bounds")
        if self.quality_std <= 0 or self.total_len < 1:
            raise ContractError("quality_std and total_len must be positive")
        object.__setattr__(self, "duration_set", durations)
        object.__setattr__(self, "quality_bounds", (lo, hi))

    def to_dict(self) -> dict:
        return {
            "duration_set": list(self.duration_set),
            "quality_mean": self.quality_mean,
            "quality_std": self.quality_std,
            "quality_bounds": list(self.quality_bounds),
            "total_len": self.total_len,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetSpec":
        known = {"duration_set", "quality_mean", "quality_std", "quality_bounds", "total_len", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown TargetSpec keys: {sorted(unknown)}")
        return cls(**d)


def sample_durations(spec: TargetSpec, rng: SplitMix64, total_len: int | None = None) -> list[int]:
    """Uniform i.i.d. durations until the total reaches the trace length; the last one is clipped."""
    total = spec.total_len if total_len is None else total_len
    out, acc = [], 0
    while acc < total:
        d = spec.duration_set[rng.choice(len(spec.duration_set))]
        d = min(d, total - acc)
        out.append(d)
        acc += d
    return out


def sample_qualities(spec: TargetSpec, rng: SplitMix64, n: int) -> list[float]:
    """``n`` normal levels truncated to ``quality_bounds`` by rejection."""
    lo, hi = spec.quality_bounds
    out = []
    while len(out) < n:
        q = spec.quality_mean + spec.quality_std * rng.normal()
        if lo <= q <= hi:
            out.append(q)
    return out


def build_target(spec: TargetSpec, rng: SplitMix64, total_len: int | None = None) -> np.ndarray:
    """Piecewise-constant target trace of ``total_len`` (default ``spec.total_len``) seconds."""
    durations = sample_durations(spec, rng, total_len)
    levels = sample_qualities(spec, rng, len(durations))
    return np.repeat(np.array(levels), durations)


def burn_in_length(params: HWParams) -> int:
    """Seconds after which a zero initial state has decayed below ``e**-36`` of its size."""
    rho = params.rho
    if rho == 0.0:
        return 2 * params.r
    return params.r + int(math.ceil(-36.0 / math.log(rho)))


@dataclass(frozen=True)
class GroundTruthSpec:
    generator: HWParams
    noise_std: float = 1.0
    ci_value: float = 2.0
    n_traces: int = 6
    target: TargetSpec = field(default_factory=TargetSpec)

    def __post_init__(self):
        if self.noise_std < 0:
            raise ContractError("noise_std must be non-negative")
        if self.ci_value <= 0:
            raise ContractError("ci_value must be positive")
        if self.n_traces < 1:
            raise ContractError("n_traces must be at least 1")
        rho = self.generator.rho
        if rho >= 1.0:
            raise StabilityError(rho)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "noise_std": self.noise_std,
            "ci_value": self.ci_value,
            "n_traces": self.n_traces,
            "target": self.target.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthSpec":
        known = {"generator", "noise_std", "ci_value", "n_traces", "target"}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown GroundTruthSpec keys: {sorted(unknown)}")
        if "generator" not in d:
            raise ContractError("GroundTruthSpec needs a 'generator' entry")
        kw = {k: v for k, v in d.items() if k not in ("generator", "target")}
        return cls(
            generator=HWParams.from_dict(d["generator"]),
            target=TargetSpec.from_dict(d.get("target", {})),
            **kw,
        )


@dataclass(frozen=True)
class GroundTruth:
    dataset: TrainingDataset
    generator: HWParams
    clean: np.ndarray


def generate_ground_truth(spec: GroundTruthSpec, offset: int = 0) -> GroundTruth:
    """Noisy "measured" traces from a known model.

    Each target is built ``burn_in_length`` seconds longer than requested and
    simulated from a zero state; the burn-in is then dropped so the kept
    samples carry no trace of the initial state. ``offset`` shifts the trace
    indices, which gives disjoint held-out sets under the same seed.
    """
    gen = spec.generator
    T = spec.target.total_len
    burn = burn_in_length(gen)
    stsq, clean, meas = [], [], []
    for i in range(offset, offset + spec.n_traces):
        seed_i = substream_seed(spec.target.seed, i)
        target = build_target(spec.target, SplitMix64(seed_i), T + burn)
        q_hat = simulate(target, gen, "zero").values
        noise = SplitMix64(substream_seed(seed_i, 1)).normals(T) * spec.noise_std
        stsq.append(target[burn:])
        clean.append(q_hat[burn:])
        meas.append(q_hat[burn:] + noise)
    names = [f"trace{i + 1:03d}" for i in range(offset, offset + spec.n_traces)]
    dataset = TrainingDataset.from_arrays(np.array(stsq), np.array(meas), spec.ci_value, names=names)
    return GroundTruth(dataset, gen, np.array(clean))
