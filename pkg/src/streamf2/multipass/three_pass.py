"""Exact histogram in three passes with O(n log log n) bits.

Pass 1 buckets the stream with a highly independent hash and keeps a short
fingerprint histogram per bucket. Pass 2 verifies every bucket's histogram
with :mod:`streamf2.histverify`, all buckets sharing one hash into ``F_q``
(``q`` the smallest prime >= n**3). Pass 3 rebuilds only the failed buckets
keyed by full element names. Too many failures abort the run.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import Aborted, UnknownFingerprint
from ..field import kwise_new, prime_at_least
from ..histverify import FingerprintHistogram, VerifyAccumulators, verify_step
from ..seeding import derive_seed
from ..streams import DEFAULT_CHUNK, as_source
from .plan import (BucketingPlan, HistogramResult, build_histograms,
                   default_abort_threshold, default_fingerprint_width,
                   default_independence, lg)


@dataclass
class ThreePassConfig:
    indep_factor: float = 6.0
    fp_factor: float = 10.0
    abort_exponent: float = 6.0
    abort_threshold: int = None
    verify_q: int = None
    num_buckets: int = None
    fingerprint_width: int = None
    force_fail_all: bool = False
    chunk: int = DEFAULT_CHUNK


def make_plan(n, universe, seed, config=None):
    cfg = config or ThreePassConfig()
    return BucketingPlan(n, universe, seed, num_buckets=cfg.num_buckets,
                         independence=default_independence(n, cfg.indep_factor),
                         fingerprint_width=cfg.fingerprint_width
                         or default_fingerprint_width(n, cfg.fp_factor))


def verify_hash(n, universe, seed, q=None, indep_factor=6.0):
    """The shared verifier hash ``h : U -> F_q``."""
    q = q or prime_at_least(max(n, 2) ** 3).q
    k = default_independence(n, indep_factor)
    return kwise_new(k, universe, q, derive_seed(seed, "verify"),
                     field_prime=q if q >= universe else None), q


def verify_all(source, plan, hists, h, q, chunk, max_distinct=None):
    """Pass 2. Returns the set of buckets whose histogram failed verification."""
    accs = {j: VerifyAccumulators(q) for j in hists}
    bad = set()
    if max_distinct is not None:
        # entries bound the bucket's distinct elements from below
        bad.update(j for j, hist in hists.items() if len(hist) > max_distinct)
    for hist in hists.values():
        hist.reset_flags()
    for xs in source.chunks(chunk):
        bs = plan.buckets(xs)
        fps = plan.fingerprints(bs, xs)
        hxs = h.eval_many(xs)
        for x, j, fp, hx in zip(xs.tolist(), bs.tolist(), fps.tolist(), hxs.tolist()):
            if j in bad:
                continue
            hist = hists.get(j)
            if hist is None:
                bad.add(j)
                continue
            try:
                verify_step(accs[j], x, fp, hist, None, hx)
            except UnknownFingerprint:
                bad.add(j)
    for hist in hists.values():
        hist.reset_flags()
    return bad | {j for j, a in accs.items() if a.acc_true != a.acc_hist}


def rebuild_full_names(source, plan, failed, chunk):
    """Pass 3: histograms keyed by element name for the failed buckets."""
    fresh = {j: FingerprintHistogram(None, full_names=True) for j in failed}
    targets = np.fromiter(failed, dtype=np.int64, count=len(failed))
    for xs in source.chunks(chunk):
        if not fresh:
            continue
        bs = plan.buckets(xs)
        mask = np.isin(bs, targets)
        for x, j in zip(xs[mask].tolist(), bs[mask].tolist()):
            fresh[j].add(x)
    return fresh


def three_pass_histogram(stream, n=None, seed=0, config=None, plan=None):
    """Exact histogram of ``stream`` in three passes.

    ``plan`` may be supplied (e.g. with forced hash values for fault
    injection); otherwise one is drawn from ``seed``. Raises :class:`Aborted`
    when at least ``abort_threshold`` buckets fail verification.
    """
    cfg = config or ThreePassConfig()
    source = as_source(stream)
    n = n or max(source.length, 2)
    if plan is None:
        plan = make_plan(n, source.universe, seed, cfg)
    start = source.passes
    hists = build_histograms(source, plan, cfg.chunk)

    h, q = verify_hash(n, plan.universe, seed, cfg.verify_q, cfg.indep_factor)
    failed = verify_all(source, plan, hists, h, q, cfg.chunk,
                        max_distinct=default_independence(n, cfg.indep_factor))
    if cfg.force_fail_all:
        failed = set(hists)
    threshold = cfg.abort_threshold
    if threshold is None:
        threshold = default_abort_threshold(n, cfg.abort_exponent)
    if failed and len(failed) >= threshold:
        raise Aborted(len(failed), threshold)

    hists.update(rebuild_full_names(source, plan, failed, cfg.chunk))
    return HistogramResult("3pass", plan, hists, set(failed), source.passes - start, n,
                           source.length, verify_q=q, verify_hash=h,
                           info={"abort_threshold": threshold})


# -- oracle audits (need full knowledge of the stream) -------------------------

def bucket_contents(plan, stream):
    """``(distinct elements, buckets, fingerprints)`` of the stream, vectorised."""
    arr = stream.to_array() if hasattr(stream, "to_array") else np.asarray(stream, dtype=np.int64)
    xs = np.unique(arr)
    bs = plan.buckets(xs)
    return xs, bs, plan.fingerprints(bs, xs)


def bucket_distinct_counts(plan, stream):
    _, bs, _ = bucket_contents(plan, stream)
    return np.bincount(bs, minlength=plan.num_buckets)


def fingerprint_collision_buckets(plan, stream):
    """Buckets holding two distinct elements with equal fingerprints."""
    _, bs, fps = bucket_contents(plan, stream)
    seen = {}
    out = set()
    for j, fp in zip(bs.tolist(), fps.tolist()):
        key = (j, fp)
        if key in seen:
            out.add(j)
        seen[key] = True
    return out


def audit_three_pass(stream, result):
    """Compare a run with oracle knowledge of which buckets truly collide."""
    colliding = fingerprint_collision_buckets(result.plan, stream)
    return {
        "colliding_buckets": colliding,
        "false_accepts": colliding - result.failed,
        "false_rejects": result.failed - colliding,
    }


def light_bucket_bound(n, factor=6.0):
    return factor * lg(n)
