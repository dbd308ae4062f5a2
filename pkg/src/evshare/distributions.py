"""Service / travel / inter-arrival time laws for the simulator.

Every law is parameterised by its mean and squared coefficient of
variation (c^2).  Random streams are numpy ``PCG64`` generators; draws
are taken in blocks and handed out one at a time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig

FAMILIES = ("exponential", "gamma", "inverse-gaussian", "deterministic",
            "zero-inflated-exponential")
BLOCK = 4096


@dataclass(frozen=True)
class TimeLaw:
    """A family plus dispersion, without a mean (the node supplies it).

    ``scv`` may be omitted for exponential (1) and deterministic (0).
    """

    family: str = "exponential"
    scv: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidConfig(f"unknown distribution family {self.family!r}; "
                                f"expected one of {', '.join(FAMILIES)}")
        implied = {"exponential": 1.0, "deterministic": 0.0}.get(self.family)
        scv = implied if self.scv is None else float(self.scv)
        if scv is None:
            raise InvalidConfig(f"{self.family} needs a squared coefficient of variation")
        if implied is not None and scv != implied:
            raise InvalidConfig(f"{self.family} has c^2 = {implied:g}, got {scv:g}")
        if scv < 0:
            raise InvalidConfig("c^2 must be >= 0")
        if self.family in ("gamma", "inverse-gaussian") and scv == 0:
            raise InvalidConfig(f"{self.family} needs c^2 > 0 (use deterministic)")
        if self.family == "zero-inflated-exponential" and scv < 1:
            raise InvalidConfig("zero-inflated exponential needs c^2 >= 1")
        object.__setattr__(self, "scv", scv)

    def at_mean(self, mean: float) -> "Distribution":
        return Distribution(self.family, float(mean), self.scv)


@dataclass(frozen=True)
class Distribution:
    family: str
    mean: float
    scv: float = 1.0

    def __post_init__(self):
        TimeLaw(self.family, self.scv)  # validation only
        if not self.mean > 0:
            raise InvalidConfig(f"mean must be > 0, got {self.mean!r}")

    @property
    def second_moment(self) -> float:
        return self.mean ** 2 * (1.0 + self.scv)

    @property
    def zero_mass(self) -> float:
        """P(X = 0): 1 - p0 for the zero-inflated law, else 0."""
        if self.family == "zero-inflated-exponential":
            return 1.0 - 2.0 / (1.0 + self.scv)
        return 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        m, c2 = self.mean, self.scv
        if self.family == "exponential":
            return rng.exponential(m, size)
        if self.family == "deterministic":
            return np.full(size, m)
        if self.family == "gamma":
            # shape 1/c^2, scale mean*c^2
            return rng.gamma(1.0 / c2, m * c2, size)
        if self.family == "inverse-gaussian":
            # numpy's Wald sampler is the normal/uniform transform method
            return rng.wald(m, m / c2, size)
        # exponential of mean m/p0 with probability p0, else exactly zero
        p0 = 2.0 / (1.0 + c2)
        hit = rng.random(size) < p0
        return np.where(hit, rng.exponential(m / p0, size), 0.0)


def exponential(mean: float) -> Distribution:
    return Distribution("exponential", mean, 1.0)


def zero_inflated(mean: float, p0: float) -> Distribution:
    """Exponential with mean ``mean/p0`` w.p. ``p0``, zero otherwise."""
    if not 0 < p0 <= 1:
        raise InvalidConfig("p0 must lie in (0, 1]")
    return Distribution("zero-inflated-exponential", mean, 2.0 / p0 - 1.0)


class Stream:
    """Draws from one law and one generator, refilled in blocks."""

    __slots__ = ("dist", "rng", "_buf", "_pos")

    def __init__(self, dist: Distribution, rng: np.random.Generator):
        self.dist, self.rng = dist, rng
        self._buf: list[float] = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self.dist.sample(self.rng, BLOCK).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x


class Uniforms:
    """Block-buffered U(0,1) draws (routing decisions)."""

    __slots__ = ("rng", "_buf", "_pos")

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._buf: list[float] = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self.rng.random(BLOCK).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x


def node_generators(base_seed: int, replication: int, count: int) -> list[np.random.Generator]:
    """``count`` independent PCG64 generators for replication ``replication``.

    The replication's root seed is ``base_seed XOR replication``.
    """
    root = np.random.SeedSequence((int(base_seed) ^ int(replication)) & (2**64 - 1))
    return [np.random.Generator(np.random.PCG64(s)) for s in root.spawn(count)]
