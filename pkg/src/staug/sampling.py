"""Seeded random sources for recombination weights and mix-up coefficients.

The bit stream comes from numpy's PCG64, seeded through ``SeedSequence``;
both are documented and stable across platforms. Gamma variates (and the
Beta variates built from them) are generated here with the Marsaglia-Tsang
squeeze method, so the draw sequence only depends on PCG64 uniforms and
numpy's standard normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid hyper-parameter or configuration value."""


class RandomSource:
    """Single-owner seeded generator.

    Use :meth:`child` to derive independent sources for parallel or
    order-independent work; the child depends only on ``(seed, key)``.
    """

    def __init__(self, seed: int = 0, _path: tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._path = tuple(_path)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *self._path])))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, path={self._path})"

    def child(self, *key: int) -> "RandomSource":
        return RandomSource(self.seed, self._path + tuple(int(k) for k in key))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        return self._gen.choice(n, size=k, replace=False)

    def gamma(self, shape: float) -> float:
        return standard_gamma(shape, self)


@dataclass
class WeightVector:
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residue_weight: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)

    def __len__(self):
        return self.weights.size

    @classmethod
    def ones(cls, n: int) -> "WeightVector":
        return cls(np.ones(n), 1.0)


def standard_gamma(shape: float, rng: RandomSource) -> float:
    """Draw from Gamma(shape, 1).

    Marsaglia & Tsang (2000) for ``shape >= 1``. Smaller shapes are boosted:
    ``G(a) = G(a + 1) * U ** (1 / a)``.
    """
    if not shape > 0:
        raise ConfigError(f"gamma shape must be > 0, got {shape}")
    if shape < 1.0:
        g = standard_gamma(shape + 1.0, rng)
        u = rng.uniform()
        # u == 0 has probability 2**-53; the result would be an exact zero
        return g * u ** (1.0 / shape)

    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.uniform()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def draw_weights(n: int, a: float, b: float, rng: RandomSource) -> WeightVector:
    """``n`` independent weights from U(a, b); residue weight is 1."""
    if not a < b:
        raise ConfigError(f"weight bounds need a < b, got a={a}, b={b}")
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    w = rng.uniform(a, b, n) if n else np.zeros(0)
    return WeightVector(w, 1.0)


def draw_lambda(alpha: float, rng: RandomSource) -> float:
    """One draw from Beta(alpha, alpha) as a ratio of two Gamma draws."""
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    x = standard_gamma(alpha, rng)
    y = standard_gamma(alpha, rng)
    s = x + y
    if s == 0.0:
        # both gammas underflowed; the limit is symmetric
        return 0.5
    return min(1.0, max(0.0, x / s))
