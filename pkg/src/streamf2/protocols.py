"""Two-party protocols for estimating |A ∩ B| to additive error eps * n.

Every protocol returns a :class:`ProtocolOutcome` and a :class:`Transcript`
whose messages carry exact bit costs. Shared randomness is a seed both
parties see and is not charged; ``newman=True`` adds the bits a private-coin
conversion would need.

* ``alg1_oneway_sample``: Alice sends an independent p-sample of her set
* ``alg2_subsample_exact``: both sides keep elements whose shared hash is
  small, then intersect the samples exactly (two-way)
* ``alg3_oneway_composed``: the same samples, intersected approximately with
  the one-way F2 sketch
* ``int_via_f2``: intersection from an F2 estimate of the union multiset,
  ``F2 = |A| + |B| + 2|A ∩ B|``
"""
import json
from dataclasses import asdict, dataclass, field
from math import ceil, floor, log2

import numpy as np

from .errors import CapExceeded, InvalidParam, NotDivisible
from .f2 import F2Config, F2Sketch
from .field import PRFHash
from .seeding import derive_seed, rng_for

ALICE, BOB = "alice", "bob"
DEFAULT_PROTOCOL_C = 40.0


def clog2(x):
    """``ceil(log2 x)``, at least 1."""
    return max(1, ceil(log2(max(x, 2))))


def round_half_away(x):
    return int(np.sign(x) * floor(abs(x) + 0.5))


@dataclass(frozen=True)
class PartyInput:
    elements: tuple
    n_bound: int
    universe: int

    def __post_init__(self):
        els = tuple(int(v) for v in self.elements)
        object.__setattr__(self, "elements", els)
        if any(a >= b for a, b in zip(els, els[1:])):
            raise InvalidParam("elements must be strictly increasing")
        if len(els) > self.n_bound:
            raise InvalidParam("set larger than its bound")
        if els and (els[0] < 0 or els[-1] >= self.universe):
            raise InvalidParam("element outside the universe")

    @classmethod
    def of(cls, values, n_bound=None, universe=None):
        els = sorted(set(int(v) for v in values))
        if universe is None:
            universe = (els[-1] + 1) if els else 1
        return cls(tuple(els), n_bound if n_bound is not None else max(len(els), 1), universe)

    def array(self):
        return np.asarray(self.elements, dtype=np.int64)

    def __len__(self):
        return len(self.elements)


@dataclass(frozen=True)
class Message:
    sender: str
    descriptor: str
    bits: int


@dataclass
class Transcript:
    messages: list = field(default_factory=list)
    total_bits: int = 0

    def send(self, sender, descriptor, bits):
        bits = int(bits)
        if bits < 0:
            raise InvalidParam("negative message size")
        self.messages.append(Message(sender, descriptor, bits))
        self.total_bits += bits
        return self

    def extend(self, other):
        for m in other.messages:
            self.send(m.sender, m.descriptor, m.bits)
        return self

    def replay(self):
        """Recount the ledger from the messages."""
        return sum(m.bits for m in self.messages)

    def senders(self):
        return {m.sender for m in self.messages}

    def is_one_way(self):
        return self.senders() <= {ALICE}

    def to_json(self):
        return json.dumps({"messages": [asdict(m) for m in self.messages],
                           "total_bits": self.total_bits}, sort_keys=True)


@dataclass
class ProtocolOutcome:
    protocol: str
    estimate: int          # None when aborted
    truth: int
    eps: float
    n: int
    aborted: bool = False
    info: dict = field(default_factory=dict)

    @property
    def error(self):
        return None if self.aborted else abs(self.estimate - self.truth)

    @property
    def within_eps(self):
        return (not self.aborted) and self.error <= self.eps * self.n

    @property
    def failed(self):
        return not self.within_eps

    def row(self, seed=None, bits=None):
        return {"protocol": self.protocol, "n": self.n, "eps": self.eps, "seed": seed,
                "truth": self.truth, "estimate": self.estimate, "bits": bits,
                "aborted": self.aborted}


def true_intersection(A, B):
    return int(np.intersect1d(A.array(), B.array(), assume_unique=True).size)


def _n_of(A, B):
    return max(A.n_bound, B.n_bound)


def newman_bits(n, universe):
    """Private-coin overhead: log2 of the input length in bits."""
    return clog2(n * clog2(universe))


def _finish(name, estimate, A, B, eps, transcript, newman, aborted=False, info=None):
    n = _n_of(A, B)
    if newman:
        transcript.send(ALICE, "newman-seed-index", newman_bits(n, A.universe))
    return (ProtocolOutcome(name, None if aborted else estimate, true_intersection(A, B), eps, n,
                            aborted, info or {}), transcript)


def sample_probability(n, eps, c):
    """``c / (n eps**2)`` clamped to at most 1."""
    if eps <= 0 or n <= 0:
        raise InvalidParam("need eps > 0 and n > 0")
    return min(1.0, c / (n * eps * eps))


def alg1_oneway_sample(A, B, eps, c=DEFAULT_PROTOCOL_C, seed=0, newman=False):
    n = _n_of(A, B)
    p = sample_probability(n, eps, c)
    a = A.array()
    keep = rng_for(seed, "alg1-sample").random(a.size) < p
    sample = a[keep]
    t = Transcript()
    if sample.size > 0 and sample.size >= 10 * p * a.size:
        return _finish("alg1", None, A, B, eps, t, newman, aborted=True, info={"p": p})
    t.send(ALICE, "|A| and sample", sample.size * clog2(A.universe) + clog2(n))
    hit = np.intersect1d(sample, B.array(), assume_unique=True).size
    return _finish("alg1", round_half_away(hit / p), A, B, eps, t, newman,
                   info={"p": p, "sample": int(sample.size)})


def shared_sample(X, n, p, seed):
    """``{x in X : h(x) <= p n}`` for a shared hash ``h : U -> {1..n}``.

    Returns the sample and the exact inclusion probability ``floor(p n) / n``.
    """
    h = PRFHash(derive_seed(seed, "shared-sample"), n)
    cut = floor(p * n + 1e-9)
    xs = X.array()
    return xs[h.eval_many(xs) + 1 <= cut], cut / n


def exact_intersection_subroutine(A_s, B_s, universe, cap=None):
    """Direct exchange: Alice sends her sample, Bob replies with the count."""
    A_s = np.asarray(A_s, dtype=np.int64)
    B_s = np.asarray(B_s, dtype=np.int64)
    if cap is not None and max(A_s.size, B_s.size) > cap:
        raise CapExceeded(f"sample of size {max(A_s.size, B_s.size)} exceeds cap {cap}")
    header = clog2((cap if cap is not None else max(A_s.size, 1)) + 1)
    t = Transcript()
    t.send(ALICE, "sample size", header)
    t.send(ALICE, "sample elements", A_s.size * clog2(universe))
    size = int(np.intersect1d(A_s, B_s).size)
    t.send(BOB, "intersection size", clog2(size + 1))
    return size, t


def _sampled_pair(A, B, eps, c, seed):
    n = _n_of(A, B)
    p = sample_probability(n, eps, c)
    A_s, p_eff = shared_sample(A, n, p, seed)
    B_s, _ = shared_sample(B, n, p, seed)
    limit = 10 * c / (eps * eps)
    aborted = A_s.size >= limit or B_s.size >= limit
    return A_s, B_s, p_eff, aborted, limit


def alg2_subsample_exact(A, B, eps, c=DEFAULT_PROTOCOL_C, seed=0, newman=False,
                         subroutine=exact_intersection_subroutine):
    A_s, B_s, p, aborted, limit = _sampled_pair(A, B, eps, c, seed)
    info = {"p": p, "sample_a": int(A_s.size), "sample_b": int(B_s.size)}
    if aborted:
        return _finish("alg2", None, A, B, eps, Transcript(), newman, aborted=True, info=info)
    size, t = subroutine(A_s, B_s, A.universe, ceil(limit))
    return _finish("alg2", round_half_away(size / p), A, B, eps, t, newman, info=info)


def _f2_intersection(a, b, universe, eps, seed, n_bound):
    """Unrounded intersection estimate and the one-way transcript."""
    cfg = F2Config(epsilon=eps, seed=derive_seed(seed, "int-f2"), universe_size=universe)
    sk = F2Sketch(cfg)
    sk.feed_many(a)
    t = Transcript()
    t.send(ALICE, "f2 sketch, |A|", sk.state_bits() + clog2(n_bound))
    sk.feed_many(b)
    return (sk.estimate() - a.size - b.size) / 2.0, t, sk.m


def int_via_f2(A, B, eps, seed=0, newman=False):
    z, t, m = _f2_intersection(A.array(), B.array(), A.universe, eps, seed, _n_of(A, B))
    return _finish("f2red", round_half_away(z), A, B, eps, t, newman, info={"m": m, "raw": z})


def alg3_inner_eps(eps, n, p, n_inner, ratio=0.5):
    """Sketch accuracy so that rescaled sketch error is at most ``ratio * eps * n``.

    The sketch's intersection error is about ``2 eps_in n_inner``; after scaling
    by ``1/p`` it must stay below ``ratio * eps * n``.
    """
    return ratio * eps * n * p / (2.0 * n_inner)


def alg3_oneway_composed(A, B, eps, c=DEFAULT_PROTOCOL_C, seed=0, newman=False, ratio=0.5):
    n = _n_of(A, B)
    A_s, B_s, p, aborted, limit = _sampled_pair(A, B, eps, c, seed)
    info = {"p": p, "sample_a": int(A_s.size), "sample_b": int(B_s.size)}
    if aborted:
        return _finish("alg3", None, A, B, eps, Transcript(), newman, aborted=True, info=info)
    n_in = max(1, min(ceil(limit), n))
    eps_in = alg3_inner_eps(eps, n, p, n_in, ratio)
    z, t, m = _f2_intersection(A_s, B_s, A.universe, eps_in, seed, n_in)
    info.update(eps_inner=eps_in, m=m)
    return _finish("alg3", round_half_away(z / p), A, B, eps, t, newman, info=info)


PROTOCOLS = {
    "alg1": alg1_oneway_sample,
    "alg2": alg2_subsample_exact,
    "alg3": alg3_oneway_composed,
    "f2red": int_via_f2,
}


def ghd_blowup(x, y, n):
    """Blow each coordinate of two k-bit strings into a block of n/k elements.

    Coordinate ``i`` with bit ``v`` becomes ``{v n + i (n/k) + t : t < n/k}``,
    so ``|A ∩ B| = n - (n/k) * hamming(x, y)``. Universe is ``[2n]``.
    """
    x = [int(v) for v in x]
    y = [int(v) for v in y]
    k = len(x)
    if k == 0 or len(y) != k:
        raise InvalidParam("bit strings must be non-empty and of equal length")
    if any(v not in (0, 1) for v in x + y):
        raise InvalidParam("bit strings must be 0/1")
    if n % k:
        raise NotDivisible(f"{k} does not divide {n}")
    w = n // k

    def blow(bits):
        return PartyInput(tuple(sorted(v * n + i * w + t for i, v in enumerate(bits)
                                       for t in range(w))), n, 2 * n)

    return blow(x), blow(y)


def hamming(x, y):
    return sum(int(a) != int(b) for a, b in zip(x, y))


def random_setpair(n, overlap, universe=None, seed=0):
    """Two n-element sets sharing ``round(overlap * n)`` elements."""
    universe = universe or n * n
    common = int(round(overlap * n))
    if not 0 <= common <= n or 2 * n - common > universe:
        raise InvalidParam("cannot fit the requested sets in the universe")
    rng = rng_for(seed, "setpair")
    pool = rng.choice(universe, size=2 * n - common, replace=False)
    A = pool[:n]
    B = np.concatenate([pool[:common], pool[n:]])
    return (PartyInput(tuple(np.sort(A).tolist()), n, universe),
            PartyInput(tuple(np.sort(B).tolist()), n, universe))
