"""Bucketing plan, pass-1 histogram building and the assembled result."""
from dataclasses import dataclass, field
from math import ceil, log2

import numpy as np

from ..field import HashBank, kwise_new
from ..histverify import FingerprintHistogram
from ..seeding import derive_seed


def lg(x):
    """log2 clamped below at 1, so derived sizes stay meaningful at tiny n."""
    return max(1.0, log2(x)) if x > 0 else 1.0


def default_num_buckets(n):
    return max(1, ceil(n / lg(n)))


def default_independence(n, factor=6.0):
    return max(2, ceil(factor * lg(n)))


def default_fingerprint_width(n, factor=10.0):
    return max(1, ceil(factor * lg(lg(n))))


def default_abort_threshold(n, exponent=6.0):
    return max(1, ceil(n / lg(n) ** exponent))


class BucketingPlan:
    """Primary hash ``b`` into buckets plus one pairwise fingerprint hash per bucket.

    Both hashes accept overrides (see :meth:`force_bucket`,
    :meth:`force_fingerprint`) for deterministic fault injection.
    """

    def __init__(self, n, universe, seed, num_buckets=None, independence=None,
                 fingerprint_width=None):
        self.n = n
        self.universe = universe
        self.seed = seed
        self.num_buckets = num_buckets or default_num_buckets(n)
        self.independence = independence or default_independence(n)
        self.fingerprint_width = fingerprint_width or default_fingerprint_width(n)
        self.b = kwise_new(self.independence, universe, self.num_buckets,
                           derive_seed(seed, "bucket"))
        self.g = HashBank(2, universe, 2**self.fingerprint_width, self.num_buckets,
                          derive_seed(seed, "fingerprint"))

    @classmethod
    def create(cls, n, universe=None, seed=0, **kw):
        return cls(n, universe or max(n * n, 2), seed, **kw)

    def force_bucket(self, x, j):
        self.b = self.b.with_overrides({x: j})

    def force_fingerprint(self, x, fp):
        self.g.set_override(self.bucket_of(x), x, fp)

    def bucket_of(self, x):
        return self.b(x)

    def fingerprint_of(self, x, bucket=None):
        j = self.bucket_of(x) if bucket is None else bucket
        return self.g.eval(j, x)

    def buckets(self, xs):
        return self.b.eval_many(xs)

    def fingerprints(self, buckets, xs):
        return self.g.eval_many(buckets, xs)

    @property
    def hash_bits(self):
        return {"b": self.b.description_bits, "g": self.g.description_bits}


def build_histograms(source, plan, chunk):
    """Pass 1: per-bucket histogram of fingerprints."""
    hists = {}
    width = plan.fingerprint_width
    for xs in source.chunks(chunk):
        bs = plan.buckets(xs)
        fps = plan.fingerprints(bs, xs)
        for j, fp in zip(bs.tolist(), fps.tolist()):
            h = hists.get(j)
            if h is None:
                h = hists[j] = FingerprintHistogram(width)
            h.add(fp)
    return hists


@dataclass
class HistogramResult:
    """Output of a multipass run: per-bucket histograms plus how to query them.

    ``relocated`` maps an element to the key of an entry created for it by the
    two-pass correction step.
    """

    algorithm: str
    plan: BucketingPlan
    hists: dict
    failed: set
    passes: int
    n: int
    stream_length: int
    verify_q: int = None
    verify_hash: object = None
    relocated: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def query(self, x):
        j = self.plan.bucket_of(x)
        hist = self.hists.get(j)
        if hist is None:
            return 0
        if hist.full_names:
            return hist.count(x)
        key = self.relocated.get(x)
        if key is None:
            key = self.plan.fingerprint_of(x, j)
        return hist.count(key)

    def materialize(self, stream):
        """Counts for every distinct element of ``stream`` (queries only, no pass charged)."""
        arr = stream.to_array() if hasattr(stream, "to_array") else np.asarray(stream, dtype=np.int64)
        xs = np.unique(arr)
        if xs.size == 0:
            return {}
        bs = self.plan.buckets(xs)
        fps = self.plan.fingerprints(bs, xs)
        out = {}
        for x, j, fp in zip(xs.tolist(), bs.tolist(), fps.tolist()):
            hist = self.hists.get(j)
            if hist is None:
                out[x] = 0
            elif hist.full_names:
                out[x] = hist.count(x)
            else:
                out[x] = hist.count(self.relocated.get(x, fp))
        return out
