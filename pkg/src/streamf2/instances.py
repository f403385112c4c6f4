"""Block-uniform random sets, greedy design families and the distinguishing experiment.

The universe ``[n * block_size]`` is split into ``n`` consecutive blocks; a
block-uniform set picks one uniform element per block. Two independent
samples meet in ``Bin(n, 1/block_size)`` elements, mean ``mu = n / block_size``.
A pair ``(X, Y)`` is a Yes-instance when ``|X ∩ Y| >= mu + gap * sqrt(mu)`` and
a No-instance when ``|X ∩ Y| <= mu - gap * sqrt(mu)`` (``gap`` defaults to 1/2).
"""
from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from .errors import BudgetExhausted, InvalidParam, StreamFormatError
from .seeding import rng_for

YES, NO = "yes", "no"
P0_TARGET = 2 * 0.2**2 * 0.47  # asymptotic lower bound on the distinguishing rate


@dataclass(frozen=True)
class BlockUniformParams:
    n: int
    block_size: int

    def __post_init__(self):
        if self.n < 1 or self.block_size < 1:
            raise InvalidParam("need n >= 1 and block_size >= 1")

    @classmethod
    def from_alpha(cls, n, alpha):
        if not 0 < alpha < 1:
            raise InvalidParam("alpha must lie in (0, 1)")
        # snap float noise so that e.g. 4096**(1/3) gives 16, not 17
        x = n**alpha
        r = round(x)
        return cls(n, r if abs(x - r) < 1e-9 * x else ceil(x))

    @property
    def alpha(self):
        return float(np.log(self.block_size) / np.log(self.n)) if self.n > 1 else 0.0

    @property
    def universe(self):
        return self.n * self.block_size

    @property
    def mu(self):
        return self.n / self.block_size


def _offsets_to_set(params, offsets):
    return np.arange(params.n, dtype=np.int64) * params.block_size + offsets


def sample_offsets(params, rng, count=None):
    shape = params.n if count is None else (count, params.n)
    return rng.integers(0, params.block_size, size=shape, dtype=np.int64)


def sample_block_uniform(params, seed=0):
    """Sorted set with exactly one uniform element per block."""
    return _offsets_to_set(params, sample_offsets(params, rng_for(seed, "block-uniform")))


def block_offsets(params, X):
    """Per-block offsets of a block-aligned set; raises unless one element per block."""
    X = np.sort(np.asarray(X, dtype=np.int64))
    blocks = X // params.block_size
    if X.size != params.n or not np.array_equal(blocks, np.arange(params.n)):
        raise InvalidParam("set is not block-aligned")
    return X - blocks * params.block_size


def feasible_cap(params, sigmas=3.0):
    """Pairwise cap that independent samples meet with high probability."""
    return ceil(params.mu + sigmas * sqrt(params.mu))


def default_cap(params):
    return ceil(params.n / 400)


@dataclass
class DesignFamily:
    params: BlockUniformParams
    sets: list
    max_pairwise: int
    attempts: int = 0

    def pairwise_max(self):
        offs = [block_offsets(self.params, X) for X in self.sets]
        best = 0
        for i in range(len(offs)):
            for j in range(i + 1, len(offs)):
                best = max(best, int(np.count_nonzero(offs[i] == offs[j])))
        return best

    def check(self):
        return all(len(X) == self.params.n for X in self.sets) and \
            self.pairwise_max() <= self.max_pairwise

    def __len__(self):
        return len(self.sets)


def build_design(params, target_count, seed=0, max_pairwise=None, budget_factor=50):
    """Greedy rejection sampling of block-uniform sets with bounded pairwise overlap.

    Raises :class:`BudgetExhausted` (carrying the sets kept so far and the
    feasible cap for these parameters) when ``budget_factor * target_count``
    draws do not suffice.
    """
    cap = default_cap(params) if max_pairwise is None else max_pairwise
    rng = rng_for(seed, "design")
    kept = []
    attempts = 0
    budget = max(1, budget_factor * target_count)
    while len(kept) < target_count and attempts < budget:
        attempts += 1
        off = sample_offsets(params, rng)
        if all(np.count_nonzero(off == k) <= cap for k in kept):
            kept.append(off)
    family = DesignFamily(params, [_offsets_to_set(params, k) for k in kept], cap, attempts)
    if len(kept) < target_count:
        err = BudgetExhausted(family.sets)
        err.family = family
        err.feasible_cap = feasible_cap(params)
        raise err
    return family


def disjoint_pair(params, seed=0):
    """Two block-aligned sets with no common element (needs block_size >= 2)."""
    if params.block_size < 2:
        raise InvalidParam("disjoint block-aligned sets need block_size >= 2")
    rng = rng_for(seed, "disjoint-pair")
    a = sample_offsets(params, rng)
    shift = rng.integers(1, params.block_size, size=params.n, dtype=np.int64)
    b = (a + shift) % params.block_size
    return _offsets_to_set(params, a), _offsets_to_set(params, b)


def label(size, params, gap=0.5):
    """YES, NO or None (inside the promise gap) for an intersection size."""
    mu = params.mu
    yes = size >= mu + gap * sqrt(mu)
    no = size <= mu - gap * sqrt(mu)
    if yes and no:
        return None  # zero gap: the exact threshold belongs to neither side
    return YES if yes else NO if no else None


def label_array(sizes, params, gap=0.5):
    mu = params.mu
    sizes = np.asarray(sizes)
    yes = sizes >= mu + gap * sqrt(mu)
    no = sizes <= mu - gap * sqrt(mu)
    return yes & ~no, no & ~yes


@dataclass
class DistinguishResult:
    rate: float
    trials: int
    distinguishing: int
    gap_x: int = 0          # trials where (X, Y) fell in the promise gap
    gap_x2: int = 0
    counts: dict = field(default_factory=dict)


def distinguishing_experiment(params, X, X2, trials, seed=0, gap=0.5, chunk=1 << 22):
    """Fraction of block-uniform ``Y`` labelling (X, Y) and (X2, Y) oppositely."""
    a = block_offsets(params, X)
    b = block_offsets(params, X2)
    rng = rng_for(seed, "distinguish")
    per = max(1, chunk // params.n)
    hits = gx = gx2 = 0
    done = 0
    while done < trials:
        m = min(per, trials - done)
        Y = sample_offsets(params, rng, m)
        sa = np.count_nonzero(Y == a, axis=1)
        sb = np.count_nonzero(Y == b, axis=1)
        ya, na = label_array(sa, params, gap)
        yb, nb = label_array(sb, params, gap)
        hits += int(np.count_nonzero((ya & nb) | (na & yb)))
        gx += int(np.count_nonzero(~ya & ~na))
        gx2 += int(np.count_nonzero(~yb & ~nb))
        done += m
    return DistinguishResult(hits / trials if trials else 0.0, trials, hits, gx, gx2,
                             {"p0_target": P0_TARGET})


def write_design(path, family):
    """``designv1 n=<N> block_size=<B> cap=<C> count=<K>`` then one ``S:`` line per set."""
    p = family.params
    with open(path, "w") as fh:
        fh.write(f"designv1 n={p.n} block_size={p.block_size} cap={family.max_pairwise} "
                 f"count={len(family)}\n")
        for X in family.sets:
            fh.write("S: " + " ".join(str(int(v)) for v in sorted(X)) + "\n")


def read_design(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("designv1"):
        raise StreamFormatError(f"{path}: not a designv1 file")
    try:
        kv = dict(t.split("=", 1) for t in lines[0].split()[1:])
        params = BlockUniformParams(int(kv["n"]), int(kv["block_size"]))
        sets = []
        for ln in lines[1:]:
            tag, _, body = ln.partition(":")
            if tag != "S":
                raise StreamFormatError(f"{path}: unexpected line {ln[:20]!r}")
            sets.append(np.array([int(t) for t in body.split()], dtype=np.int64))
        family = DesignFamily(params, sets, int(kv["cap"]))
    except (KeyError, ValueError) as e:
        if isinstance(e, StreamFormatError):
            raise
        raise StreamFormatError(f"{path}: malformed design file") from None
    if len(sets) != int(kv.get("count", len(sets))):
        raise StreamFormatError(f"{path}: set count does not match header")
    return family
