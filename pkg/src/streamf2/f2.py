"""Bias-corrected hashed-multiset estimator for the second frequency moment.

Hash the stream with a 4-wise independent ``h : U -> [m]``, keep the exact
multiset of images, and correct its repeat rate ``F`` for the expected number
of spurious collisions::

    F' = m / (m - 1) * (F - n**2 / m) = (m * F - n**2) / (m - 1)

Over the choice of ``h`` this is unbiased for ``F2`` and has variance
``2 (F2**2 - F4) / (m - 1)``.
"""
import copy
from collections import Counter
from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import DegenerateM, InvalidParam
from .field import horner, kwise_new, prime_at_least
from .multiset import CompactMultiset
from .seeding import derive_seed

DEFAULT_C = 201.0


@dataclass(frozen=True)
class F2Config:
    epsilon: float
    constant_c: float = DEFAULT_C
    seed: int = 0
    universe_size: int = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParam("epsilon must be positive")
        if not self.constant_c > 0:
            raise InvalidParam("constant_c must be positive")


def f2_config_m(cfg):
    """Table size ``ceil(c / eps**2)``.

    A ratio within 1e-9 of an integer is treated as that integer so that
    float noise in ``eps`` (e.g. 0.1) never bumps the size by one.
    """
    x = cfg.constant_c / (cfg.epsilon * cfg.epsilon)
    r = round(x)
    if abs(x - r) <= 1e-9 * max(x, 1.0):
        return int(r)
    return int(ceil(x))


def exact_f2(stream):
    return sum(c * c for c in Counter(np.asarray(stream).tolist()).values())


def exact_f4(stream):
    return sum(c**4 for c in Counter(np.asarray(stream).tolist()).values())


def estimator_variance(stream, m):
    """Exact variance of F' for a stream under a 4-wise independent hash."""
    f2 = exact_f2(stream)
    return 2.0 * (f2 * f2 - exact_f4(stream)) / (m - 1)


def _combine(m, F, n):
    if m < 2:
        raise DegenerateM(f"m={m} < 2")
    return (m * F - n * n) / (m - 1)


class F2Sketch:
    """Streaming state: one 4-wise hash plus the exact multiset of hash images."""

    def __init__(self, cfg, universe_size=None, seed=None):
        self.cfg = cfg
        self.m = f2_config_m(cfg)
        U = universe_size or cfg.universe_size
        if U is None:
            raise InvalidParam("universe_size is required")
        self.universe_size = int(U)
        self.hash = kwise_new(4, self.universe_size, self.m, cfg.seed if seed is None else seed)
        self.table = CompactMultiset(self.m)
        self.n_seen = 0

    def feed(self, x):
        self.table.insert(self.hash(x))
        self.n_seen += 1
        return self

    def feed_many(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        self.table.insert_many(self.hash.eval_many(xs))
        self.n_seen += int(xs.size)
        return self

    def estimate(self):
        return _combine(self.m, self.table.f2(), self.n_seen)

    def estimate_clamped(self):
        """The estimate clipped into ``[n, n**2]``, where every true F2 lies."""
        n = self.n_seen
        return float(min(max(self.estimate(), n), n * n))

    def state_bits(self):
        """Bits to ship this sketch: the multiset encoding plus the hash coefficients."""
        return self.table.budget().content_bits + self.hash.description_bits

    def copy(self):
        return copy.deepcopy(self)


def f2_feed(sk, x):
    return sk.feed(x)


def f2_estimate(sk):
    return sk.estimate()


def trial_seeds(root, trials, tag="f2"):
    return [derive_seed(root, tag, t) for t in range(trials)]


def f2_trial_estimates(stream, cfg, seeds, universe_size=None, chunk_elems=1 << 22):
    """F' for one stream under many independent hash seeds, vectorised.

    Bit-identical to building an :class:`F2Sketch` per seed and feeding the
    stream; the work is grouped by distinct element and done in numpy.
    """
    stream = np.asarray(stream, dtype=np.int64)
    n = int(stream.size)
    m = f2_config_m(cfg)
    U = universe_size or cfg.universe_size or max(n * n, 1)
    seeds = list(seeds)
    if n == 0:
        return np.zeros(len(seeds))
    p = prime_at_least(max(U, m)).q
    xs, w = np.unique(stream, return_counts=True)
    if xs.max() >= U:
        raise InvalidParam("stream element outside universe")
    w = w.astype(np.int64)
    # packed sort keys (row * m + cell) * len(xs) + index must stay below 2**63
    chunk_elems = min(chunk_elems, max(xs.size, (2**62 // (m * xs.size)) * xs.size))
    # draw exactly what kwise_new would draw for each seed
    coeffs = np.array([kwise_new(4, U, m, s, field_prime=p).coefficients for s in seeds],
                      dtype=np.int64 if p < 2**63 else object)
    out = np.empty(len(seeds))
    per = max(1, chunk_elems // xs.size)
    for lo in range(0, len(seeds), per):
        block = coeffs[lo:lo + per]
        S = block.shape[0]
        cs = [block[:, i:i + 1] for i in range(4)]
        H = (horner(cs, xs[None, :], p) % m).astype(np.int64)
        H += np.arange(S, dtype=np.int64)[:, None] * m
        # sort packed (cell, element index) pairs; a plain sort beats argsort
        packed = np.sort((H * xs.size + np.arange(xs.size, dtype=np.int64)).ravel())
        keys = packed // xs.size
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        sums = np.add.reduceat(w[packed % xs.size], starts)
        F = np.bincount(keys[starts] // m, weights=(sums * sums).astype(np.float64), minlength=S)
        F = np.rint(F).astype(np.int64)
        if m * int(F.max()) < 2**53 and n * n < 2**53:
            out[lo:lo + S] = (m * F.astype(np.float64) - float(n * n)) / float(m - 1)
        else:
            out[lo:lo + S] = [_combine(m, int(f), n) for f in F]
    return out
