"""Exact multisets over ``[0, m)`` with information-theoretic size accounting."""
from dataclasses import dataclass
from math import ceil, lgamma, log

import numpy as np

from .errors import OutOfRange

_LN2 = log(2.0)
MAX_STREAM = 2**40


@dataclass
class BitBudget:
    """Bit count for one category of stored or transmitted state."""

    content_bits: float
    overhead_bits: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.content_bits < 0:
            raise ValueError("content_bits must be non-negative")

    @property
    def total(self):
        return self.content_bits + self.overhead_bits

    def to_dict(self):
        return {"label": self.label, "content_bits": self.content_bits,
                "overhead_bits": self.overhead_bits}


def ms_info_bits(n, m):
    """log2 of C(n + m - 1, n): bits to name one n-element multiset over [m]."""
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    if n == 0:
        return 0.0
    return (lgamma(n + m) - lgamma(n + 1) - lgamma(m)) / _LN2


class CompactMultiset:
    """Counting map over ``[0, range)``.

    Memory is accounted by :meth:`budget` as ``ceil(log2 C(n+m-1, n))`` bits,
    the size of an optimal encoding, not by the dict's RAM footprint.
    """

    def __init__(self, range):
        if range < 1:
            raise ValueError("range must be positive")
        self.range = range
        self.counts = {}
        self.total = 0

    def insert(self, v, times=1):
        if not 0 <= v < self.range:
            raise OutOfRange(f"{v} not in [0, {self.range})")
        self.counts[v] = self.counts.get(v, 0) + times
        self.total += times
        return self

    def insert_many(self, values):
        values = np.asarray(values, dtype=np.int64)
        if values.size == 0:
            return self
        if values.min() < 0 or values.max() >= self.range:
            raise OutOfRange(f"values outside [0, {self.range})")
        keys, cnt = np.unique(values, return_counts=True)
        counts = self.counts
        for k, c in zip(keys.tolist(), cnt.tolist()):
            counts[k] = counts.get(k, 0) + c
        self.total += int(values.size)
        return self

    def count(self, v):
        return self.counts.get(v, 0)

    def f2(self):
        return sum(c * c for c in self.counts.values())

    def info_bits(self):
        return ms_info_bits(self.total, self.range)

    def budget(self, label="multiset"):
        return BitBudget(float(ceil(self.info_bits())), 0.0, label)

    def __len__(self):
        return self.total

    def __repr__(self):
        return f"CompactMultiset(range={self.range}, total={self.total}, distinct={len(self.counts)})"


def ms_insert(ms, v):
    return ms.insert(v)


def ms_f2(ms):
    return ms.f2()
