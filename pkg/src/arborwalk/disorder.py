"""Per-(vertex, letter) random phases, generated counter-style.

Each phase is a keyed hash of (seed, vertex word, letter) pushed through
the inverse CDF of the chosen distribution, so the value at a site never
depends on ball size, enumeration order, or query order.  This is what
makes disorder sweeps reproducible and trivially parallel.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .tree import Word, concat

TWO_PI = 2.0 * math.pi
_U64 = float(2**64)


@dataclass(frozen=True)
class UniformFull:
    """Uniform phases on the full circle [0, 2*pi)."""

    def quantile(self, u: float) -> float:
        return TWO_PI * u


@dataclass(frozen=True)
class UniformInterval:
    """Uniform phases on [a, b); rejects empty intervals (atomic measures)."""

    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("interval must have nonempty interior (b > a)")

    def quantile(self, u: float) -> float:
        return self.a + (self.b - self.a) * u


@dataclass(frozen=True)
class DensityTable:
    """Piecewise-constant density on a uniform grid over [0, 2*pi).

    `weights` are nonnegative bin masses (normalized internally); sampling
    uses the piecewise-linear inverse CDF.
    """

    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) < 1:
            raise ValueError("weights must be a nonempty 1-d sequence")
        if (w < 0).any() or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive total")
        if np.count_nonzero(w) == 0:
            raise ValueError("density support is empty")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    def quantile(self, u: float) -> float:
        w = np.asarray(self.weights)
        cdf = np.concatenate([[0.0], np.cumsum(w) / w.sum()])
        k = int(np.searchsorted(cdf, u, side="right") - 1)
        k = min(k, len(w) - 1)
        width = TWO_PI / len(w)
        mass = cdf[k + 1] - cdf[k]
        frac = 0.0 if mass == 0 else (u - cdf[k]) / mass
        return width * (k + frac)


@dataclass(frozen=True)
class DisorderField:
    """The i.i.d. phase field omega^letter_vertex, keyed by a 64-bit seed."""

    seed: int
    distribution: object = field(default_factory=UniformFull)

    def _uniform(self, word: Word, letter: int) -> float:
        key = (self.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
        data = bytes([letter]) + bytes(word)
        h = hashlib.blake2b(data, digest_size=8, key=key).digest()
        return int.from_bytes(h, "little") / _U64

    def phase(self, word: Word, letter: int) -> float:
        return self.distribution.quantile(self._uniform(word, letter))

    def translated(self, shift: Word, alphabet) -> "DisorderField":
        """The pulled-back field omega'^tau_x = omega^tau_{shift * x}."""
        return _TranslatedField(self.seed, self.distribution, shift, alphabet)


@dataclass(frozen=True)
class _TranslatedField(DisorderField):
    shift: Word = ()
    alphabet: object = None

    def phase(self, word: Word, letter: int) -> float:
        moved = concat(self.shift, word, self.alphabet)
        return DisorderField.phase(self, moved, letter)

    def translated(self, shift: Word, alphabet) -> "DisorderField":
        composed = concat(self.shift, shift, alphabet)
        return _TranslatedField(self.seed, self.distribution, composed, alphabet)
