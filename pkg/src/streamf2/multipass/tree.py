"""Exact histogram in 2r+1 passes over a depth-r tree of buckets.

Leaves are buckets. One pass builds short-fingerprint leaf histograms; each
of ``r`` steps then verifies every node of one level (all leaves below it at
once, with a verifier field that grows with the level) and rebuilds the
leaves of failed nodes with a longer fingerprint.

Level sizes ``L_0 = n`` and ``L_{i+1} = ceil(log2 L_i)``; the node degree at
level ``i`` is ``ceil(L_{r-i} / L_{r-i+1})`` and there are ``ceil(n / L_r)``
leaves. Leaf ``u`` has ancestor ``u // (d_1 * ... * d_i)`` at level ``i``.
"""
from dataclasses import dataclass
from math import ceil, log2, prod

import numpy as np

from ..errors import DepthTooLarge, InvalidParam, UnknownFingerprint
from ..field import PRFHash, find_prime_in
from ..histverify import FingerprintHistogram, VerifyAccumulators, verify_step
from ..seeding import derive_seed
from ..streams import DEFAULT_CHUNK, as_source
from .plan import HistogramResult


def level_sizes(n, r):
    """``[L_0, ..., L_r]``; raises :class:`DepthTooLarge` unless ``L_r >= 2``."""
    if r < 1:
        raise InvalidParam("depth must be at least 1")
    L = [int(n)]
    for _ in range(r):
        if L[-1] < 2:
            break
        L.append(ceil(log2(L[-1])))
    if len(L) <= r or L[r] < 2 or any(a <= b for a, b in zip(L, L[1:])):
        raise DepthTooLarge(f"n={n} does not support depth r={r} (levels {L})")
    return L


def max_depth(n):
    r = 0
    while True:
        try:
            level_sizes(n, r + 1)
        except DepthTooLarge:
            return r
        r += 1


@dataclass
class TreeConfig:
    n: int
    r: int
    level_sizes: list
    degrees: list            # degrees[i] for i = 1..r; degrees[0] is unused (1)
    num_leaves: int
    level_counts: list       # nodes at each level 0..r
    primes: list             # verifier prime per step 0..r-1
    fp_ranges: list          # fingerprint range for g^(0..r)
    heavy_leaf: int          # leaf heaviness threshold L_r**5
    fp_cap_bits: int = 64

    @property
    def fp_widths(self):
        return [max(1, (R - 1).bit_length()) for R in self.fp_ranges]

    def ancestor(self, leaves, level):
        return leaves // prod(self.degrees[1:level + 1])

    def leaves_under(self, node, level):
        span = prod(self.degrees[1:level + 1])
        return range(node * span, min((node + 1) * span, self.num_leaves))

    @property
    def passes(self):
        return 2 * self.r + 1


def build_tree_config(n, r, fp_cap_bits=64, primes=None, leaf_exponent=5, prime_exponent=5,
                      fp_exponent0=50, fp_exponent=10):
    """Tree shape, verifier primes and fingerprint ranges for stream length ``n``.

    ``primes`` overrides the verifier primes (e.g. huge fields in tests).
    Fingerprint ranges are capped at ``2**fp_cap_bits``.
    """
    L = level_sizes(n, r)
    degrees = [1] + [ceil(L[r - i] / L[r - i + 1]) for i in range(1, r + 1)]
    num_leaves = max(1, ceil(n / L[r]))
    counts = [ceil(num_leaves / prod(degrees[1:i + 1])) for i in range(r + 1)]
    if primes is None:
        primes = []
        for ell in range(r):
            base = L[r - ell - 1] ** prime_exponent
            primes.append(find_prime_in(base, 2 * base).q)
    elif len(primes) != r:
        raise InvalidParam("need one verifier prime per step")
    cap = 2**fp_cap_bits
    ranges = [min(L[r] ** fp_exponent0, cap)] + [min(q**fp_exponent, cap) for q in primes]
    return TreeConfig(n, r, L, degrees, num_leaves, counts, list(primes), ranges,
                      L[r] ** leaf_exponent, fp_cap_bits)


class TreeState:
    """Leaf histograms, their fingerprint versions and the hashes.

    Acts as the bucketing plan of the returned :class:`HistogramResult`.
    """

    def __init__(self, cfg, universe, seed):
        self.cfg = cfg
        self.universe = universe
        self.seed = seed
        self.num_buckets = cfg.num_leaves
        self.b = PRFHash(derive_seed(seed, "tree-leaf"), cfg.num_leaves)
        self.g = [PRFHash(derive_seed(seed, "tree-fp", k), R) for k, R in enumerate(cfg.fp_ranges)]
        self.h = [PRFHash(derive_seed(seed, "tree-verify", ell), q)
                  for ell, q in enumerate(cfg.primes)]
        self.version = np.zeros(cfg.num_leaves, dtype=np.int64)
        self.hists = {}
        self.failed = [set() for _ in range(cfg.r)]
        self.heavy = [set() for _ in range(cfg.r)]
        self.rebuilt = [0] * cfg.r
        self.verifier_runs = [0] * cfg.r

    # -- fault injection ------------------------------------------------------
    def force_leaf(self, x, u):
        self.b.overrides[int(x)] = int(u)

    def force_fingerprint(self, x, fp, k=0):
        self.g[k].overrides[int(x)] = int(fp)

    # -- plan interface -------------------------------------------------------
    def bucket_of(self, x):
        return int(self.b(x))

    def buckets(self, xs):
        return self.b.eval_many(xs).astype(np.int64)

    def fingerprint_of(self, x, bucket=None):
        u = self.bucket_of(x) if bucket is None else bucket
        return int(self.g[int(self.version[u])](x))

    def fingerprints(self, buckets, xs):
        xs = np.asarray(xs, dtype=np.int64)
        vers = self.version[buckets]
        out = np.empty(xs.size, dtype=object)
        for k in np.unique(vers).tolist():
            sel = vers == k
            out[sel] = self.g[k].eval_many(xs[sel])
        return out

    @property
    def fingerprint_width(self):
        return self.cfg.fp_widths[0]

    @property
    def hash_bits(self):
        return {"b": self.b.description_bits,
                "g": sum(g.description_bits for g in self.g),
                "h": sum(h.description_bits for h in self.h)}


def compute_M(state, node, level):
    """Stream elements, with multiplicity, that land in leaves below ``node``."""
    return sum(state.hists[u].total() for u in state.cfg.leaves_under(node, level)
               if u in state.hists)


def compute_D(state, node, level):
    """Distinct fingerprint entries below ``node`` (a lower bound on distinct elements)."""
    return sum(len(state.hists[u]) for u in state.cfg.leaves_under(node, level)
               if u in state.hists)


def oracle_D(state, node, level, stream):
    """Exact number of distinct stream elements below ``node``."""
    xs = np.unique(np.asarray(stream, dtype=np.int64))
    leaves = state.buckets(xs)
    return int(np.count_nonzero(state.cfg.ancestor(leaves, level) == node))


def _leaf_masses(state):
    M = np.zeros(state.cfg.num_leaves, dtype=np.int64)
    for u, hist in state.hists.items():
        M[u] = hist.total()
    return M


def _level_masses(state, level):
    M = _leaf_masses(state)
    nodes = state.cfg.ancestor(np.arange(state.cfg.num_leaves), level)
    return np.bincount(nodes, weights=M, minlength=state.cfg.level_counts[level]).astype(np.int64)


def heavy_nodes(state, level):
    """Nodes at ``level`` marked failed without running the verifier."""
    cfg = state.cfg
    if level == 0:
        return set(np.flatnonzero(_leaf_masses(state) >= cfg.heavy_leaf).tolist())
    child = _level_masses(state, level - 1)
    heavy_children = np.flatnonzero(child >= cfg.primes[level - 1])
    return set((heavy_children // cfg.degrees[level]).tolist())


def _fill(source, state, leaves, chunk):
    """Add every element whose leaf is in ``leaves`` (or all, if None) to its histogram."""
    target = None if leaves is None else np.fromiter(leaves, dtype=np.int64, count=len(leaves))
    for xs in source.chunks(chunk):
        if target is not None and target.size == 0:
            continue
        us = state.buckets(xs)
        if target is not None:
            keep = np.isin(us, target)
            xs, us = xs[keep], us[keep]
        fps = state.fingerprints(us, xs)
        for u, fp in zip(us.tolist(), fps.tolist()):
            hist = state.hists.get(u)
            if hist is None:
                hist = state.hists[u] = FingerprintHistogram(
                    state.cfg.fp_widths[int(state.version[u])])
            hist.add(fp)


def verify_level(source, state, level, chunk):
    """One verify pass at ``level``; returns the failed node set."""
    cfg = state.cfg
    q = cfg.primes[level]
    h = state.h[level]
    heavy = heavy_nodes(state, level)
    state.heavy[level] = heavy
    accs = {}
    bad = set(heavy)
    for hist in state.hists.values():
        hist.reset_flags()
    for xs in source.chunks(chunk):
        us = state.buckets(xs)
        vs = cfg.ancestor(us, level)
        fps = state.fingerprints(us, xs)
        hxs = h.eval_many(xs)
        for x, u, v, fp, hx in zip(xs.tolist(), us.tolist(), vs.tolist(), fps.tolist(), hxs.tolist()):
            if v in bad:
                continue
            acc = accs.get(v)
            if acc is None:
                acc = accs[v] = VerifyAccumulators(q)
            try:
                verify_step(acc, x, fp, state.hists[u], None, int(hx))
            except (UnknownFingerprint, KeyError):
                bad.add(v)
    for hist in state.hists.values():
        hist.reset_flags()
    state.verifier_runs[level] = len([v for v in accs if v not in heavy])
    bad.update(v for v, a in accs.items() if a.acc_true != a.acc_hist)
    return bad


def rebuild_level(source, state, level, failed, chunk):
    """Rebuild every leaf below a failed node with fingerprint version ``level + 1``."""
    cfg = state.cfg
    leaves = set()
    for v in failed:
        leaves.update(cfg.leaves_under(v, level))
    for u in leaves:
        state.version[u] = level + 1
        state.hists.pop(u, None)
    _fill(source, state, leaves, chunk)
    state.rebuilt[level] = len([u for u in leaves if u in state.hists])
    return leaves


def r_pass_histogram(stream, n=None, r=1, seed=0, config=None, state=None, chunk=DEFAULT_CHUNK):
    """Exact histogram of ``stream`` in ``2r + 1`` passes.

    ``state`` may be a prepared :class:`TreeState` (e.g. with forced hash
    values); otherwise one is built from ``config`` or from ``n`` and ``r``.
    """
    source = as_source(stream)
    n = n or max(source.length, 4)
    if state is None:
        cfg = config or build_tree_config(n, r)
        state = TreeState(cfg, source.universe, seed)
    cfg = state.cfg
    start = source.passes
    _fill(source, state, None, chunk)
    for level in range(cfg.r):
        failed = verify_level(source, state, level, chunk)
        state.failed[level] = failed
        rebuild_level(source, state, level, failed, chunk)
    return HistogramResult(f"rpass(r={cfg.r})", state, state.hists, set(), source.passes - start,
                           n, source.length,
                           info={"failed": [sorted(f) for f in state.failed],
                                 "heavy": [sorted(hv) for hv in state.heavy],
                                 "rebuilt": list(state.rebuilt),
                                 "verifier_runs": list(state.verifier_runs)})
