"""Exact histogram in two passes by recovering one global discrepancy polynomial.

After the pass-1 fingerprint histograms, a single pair of accumulators over a
huge field ``F_q`` (``q`` the smallest prime above ``3**n``) evaluates

    Delta = TrueSum - HistSum = sum_x a_x z_x

at a pseudorandom point ``h``. For a shadowed element ``x`` (its fingerprint
was first claimed by another element ``y`` of the same bucket) ``a_x = f_x``
and ``a_y`` drops by ``f_x``. Every other coefficient is zero. The sparse
polynomial is found by scanning a canonical enumeration of all candidates
with bounded support and coefficients. The scan is exponential, so this runs
at toy scale only.
"""
from dataclasses import dataclass, field
from itertools import combinations, product
from math import comb

import numpy as np

from ..errors import EnumerationCapExceeded, InvalidParam, NoCandidateMatched, UnknownFingerprint
from ..field import PRFHash, find_prime_in
from ..histverify import VerifyAccumulators, verify_step
from ..seeding import derive_seed
from ..streams import DEFAULT_CHUNK, as_source
from .plan import HistogramResult, build_histograms
from .three_pass import ThreePassConfig, make_plan

N_EFF_CAP = 150


@dataclass
class DiscrepancyPolynomial:
    """Sparse integer linear form ``element -> coefficient`` (zeros never stored)."""

    coeffs: dict
    sparsity_bound: int = None
    coeff_bound: int = None

    def __post_init__(self):
        self.coeffs = {int(k): int(v) for k, v in self.coeffs.items() if v != 0}
        if self.sparsity_bound is not None and len(self.coeffs) > self.sparsity_bound:
            raise InvalidParam("more non-zero coefficients than the sparsity bound")
        if self.coeff_bound is not None and any(abs(v) > self.coeff_bound for v in self.coeffs.values()):
            raise InvalidParam("coefficient outside the bound")

    def evaluate(self, hvals, q):
        """Value mod q at the point ``hvals`` (a mapping or sequence element -> h(element))."""
        return sum(a * int(hvals[x]) for x, a in self.coeffs.items()) % q

    def is_zero(self):
        return not self.coeffs

    def __eq__(self, other):
        return isinstance(other, DiscrepancyPolynomial) and self.coeffs == other.coeffs


def candidate_values(coeff_bound):
    """Non-zero coefficient values in ascending order."""
    return [v for v in range(-coeff_bound, coeff_bound + 1) if v != 0]


def enumerate_candidates(universe, sparsity, coeff_bound):
    """Every candidate ``(support, coefficients)`` in canonical order.

    Support size ascending, then supports lexicographically, then coefficient
    tuples lexicographically over ascending values.
    """
    vals = candidate_values(coeff_bound)
    for j in range(min(sparsity, universe) + 1):
        for support in combinations(range(universe), j):
            for cs in product(vals, repeat=j):
                yield support, cs


def candidate_count(universe, sparsity, coeff_bound):
    """Exact size of the candidate family: sum_j C(U, j) (2B)^j."""
    return sum(comb(universe, j) * (2 * coeff_bound) ** j for j in range(min(sparsity, universe) + 1))


def candidate_count_bound(universe, sparsity, coeff_bound):
    """The looser count sum_j C(U, j) (2B + 1)^j used for the enumeration cap."""
    return sum(comb(universe, j) * (2 * coeff_bound + 1) ** j for j in range(min(sparsity, universe) + 1))


def two_pass_prime(n, cap=N_EFF_CAP):
    """Smallest prime above 3**min(n, cap)."""
    e = min(n, cap)
    return find_prime_in(3**e + 1, 2 * 3**e).q


@dataclass
class TwoPassConfig:
    enum_cap: int = 10**7
    q: int = None
    n_eff_cap: int = N_EFF_CAP
    plan: ThreePassConfig = field(default_factory=ThreePassConfig)
    chunk: int = DEFAULT_CHUNK


def oracle_discrepancy(stream, plan):
    """Delta computed with full knowledge of the stream (independent of the passes)."""
    arr = stream.to_array() if hasattr(stream, "to_array") else np.asarray(stream, dtype=np.int64)
    if arr.size == 0:
        return DiscrepancyPolynomial({})
    bs = plan.buckets(arr)
    fps = plan.fingerprints(bs, arr)
    first = {}
    coeffs = {}
    for x, j, fp in zip(arr.tolist(), bs.tolist(), fps.tolist()):
        owner = first.setdefault((j, fp), x)
        coeffs[x] = coeffs.get(x, 0) + 1
        coeffs[owner] = coeffs.get(owner, 0) - 1
    return DiscrepancyPolynomial(coeffs)


def recover(res, hvals, q, universe, sparsity, coeff_bound):
    """First candidate in canonical order whose value at ``hvals`` equals ``res``."""
    tried = 0
    for support, cs in enumerate_candidates(universe, sparsity, coeff_bound):
        tried += 1
        if sum(a * hvals[x] for x, a in zip(support, cs)) % q == res:
            return DiscrepancyPolynomial(dict(zip(support, cs))), tried
    raise NoCandidateMatched(f"no candidate matched after {tried} tries")


def _apply_correction(delta, plan, hists):
    relocated = {}
    for x, a in sorted(delta.coeffs.items()):
        if a <= 0:
            continue
        # x was shadowed: its a occurrences were counted under another element's entry
        j = plan.bucket_of(x)
        hist = hists.get(j)
        if hist is None:
            continue
        fp = plan.fingerprint_of(x, j)
        e = hist.entries.get(fp)
        if e is not None:
            e[0] -= a
            if e[0] <= 0:
                del hist.entries[fp]
        key = next((v for v in range(2**plan.fingerprint_width) if v not in hist.entries),
                   None)
        if key is None:
            key = ("name", x)
        hist.add(key, a)
        relocated[x] = key
    return relocated


def two_pass_histogram(stream, n=None, sparsity=3, coeff_bound=3, seed=0, config=None,
                       plan=None):
    cfg = config or TwoPassConfig()
    source = as_source(stream)
    n = n or max(source.length, 2)
    universe = source.universe if plan is None else plan.universe
    bound = candidate_count_bound(universe, sparsity, coeff_bound)
    if bound > cfg.enum_cap:
        raise EnumerationCapExceeded(bound, cfg.enum_cap)
    if plan is None:
        plan = make_plan(n, universe, seed, cfg.plan)
    start = source.passes
    hists = build_histograms(source, plan, cfg.chunk)

    q = cfg.q or two_pass_prime(n, cfg.n_eff_cap)
    h = PRFHash(derive_seed(seed, "twopass-h"), q)
    acc = VerifyAccumulators(q)
    for hist in hists.values():
        hist.reset_flags()
    for xs in source.chunks(cfg.chunk):
        bs = plan.buckets(xs)
        fps = plan.fingerprints(bs, xs)
        hxs = h.eval_many(xs)
        for x, j, fp, hx in zip(xs.tolist(), bs.tolist(), fps.tolist(), hxs.tolist()):
            try:
                verify_step(acc, x, fp, hists[j], None, int(hx))
            except (UnknownFingerprint, KeyError):
                raise InvalidParam("stream changed between passes") from None
    for hist in hists.values():
        hist.reset_flags()
    res = (acc.acc_true - acc.acc_hist) % q

    hvals = [int(v) for v in h.eval_many(np.arange(universe, dtype=np.int64))]
    delta, tried = recover(res, hvals, q, universe, sparsity, coeff_bound)
    relocated = _apply_correction(delta, plan, hists)
    return HistogramResult("2pass", plan, hists, set(), source.passes - start, n,
                           source.length, verify_q=q, verify_hash=h, relocated=relocated,
                           info={"discrepancy": delta, "res": res, "candidates_tried": tried})
