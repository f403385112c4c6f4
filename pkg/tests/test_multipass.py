from collections import Counter
from itertools import product
from math import ceil, log2

import numpy as np
import pytest
import sympy

from streamf2.errors import (Aborted, DepthTooLarge, EnumerationCapExceeded, InvalidParam,
                             NoCandidateMatched)
from streamf2.multipass import (BucketingPlan, DiscrepancyPolynomial, ThreePassConfig,
                                TwoPassConfig, TreeState, audit_three_pass,
                                bucket_distinct_counts, build_tree_config, candidate_count,
                                candidate_count_bound, compute_D, compute_M,
                                enumerate_candidates, fingerprint_collision_buckets,
                                level_sizes, light_bucket_bound, make_plan, max_depth,
                                memory_report, oracle_D, oracle_discrepancy, r_pass_histogram,
                                three_pass_histogram, two_pass_histogram)
from streamf2.multipass.plan import default_abort_threshold
from streamf2.streams import StreamSource, generate_stream


def oracle(stream):
    return dict(Counter(np.asarray(stream).tolist()))


def rig_collision(plan, x, y):
    """Put y in x's bucket with x's fingerprint."""
    plan.force_bucket(y, plan.bucket_of(x))
    plan.force_fingerprint(y, plan.fingerprint_of(x))


class TestPlanDefaults:
    def test_sizes_at_4096(self):
        plan = BucketingPlan.create(4096, seed=0)
        assert plan.num_buckets == ceil(4096 / 12)
        assert plan.independence == 72
        assert plan.fingerprint_width == ceil(10 * log2(12))
        assert default_abort_threshold(4096) == 1

    def test_tiny_n_clamped(self):
        plan = BucketingPlan.create(2, seed=0)
        assert plan.num_buckets >= 1 and plan.fingerprint_width >= 1

    def test_forcing(self):
        plan = BucketingPlan.create(256, seed=1)
        rig_collision(plan, 3, 77)
        assert plan.bucket_of(77) == plan.bucket_of(3)
        assert plan.fingerprint_of(77) == plan.fingerprint_of(3)
        xs = np.array([3, 77])
        bs = plan.buckets(xs)
        fps = plan.fingerprints(bs, xs)
        assert bs[0] == bs[1] and fps[0] == fps[1]


class TestThreePass:
    def test_all_distinct_matches_oracle(self):
        s = np.arange(256) * 37 % 65536
        res = three_pass_histogram(s, n=256, seed=4)
        assert not fingerprint_collision_buckets(res.plan, s)
        assert res.materialize(s) == oracle(s)
        assert res.passes == 3 and res.failed == set()

    def test_query_single_elements(self):
        s = generate_stream(1000, dup_rate=0.6, seed=5)
        res = three_pass_histogram(s, n=1000, seed=5)
        for x, c in list(oracle(s).items())[:50]:
            assert res.query(x) == c

    def test_injected_collision_fails_and_is_rebuilt(self):
        n = 256
        s = np.array([3, 3, 3, 77] + list(range(100, 150)))
        plan = make_plan(n, n * n, seed=2)
        rig_collision(plan, 3, 77)
        cfg = ThreePassConfig(abort_threshold=10)
        res = three_pass_histogram(StreamSource(s, n * n), n=n, config=cfg, plan=plan)
        j = plan.bucket_of(3)
        assert j in res.failed
        assert res.hists[j].full_names
        assert res.materialize(s) == oracle(s)
        audit = audit_three_pass(s, res)
        assert audit["false_accepts"] == set()

    def test_abort_threshold_zero(self):
        n = 256
        s = np.array([3, 3, 77])
        plan = make_plan(n, n * n, seed=2)
        rig_collision(plan, 3, 77)
        with pytest.raises(Aborted):
            three_pass_histogram(StreamSource(s, n * n), n=n, plan=plan,
                                 config=ThreePassConfig(abort_threshold=0))

    def test_clean_run_never_aborts_on_zero_threshold(self):
        s = np.arange(50)
        res = three_pass_histogram(s, n=64, seed=0, config=ThreePassConfig(abort_threshold=0))
        assert res.failed == set()

    def test_force_fail_all(self):
        s = generate_stream(512, dup_rate=0.5, seed=8)
        cfg = ThreePassConfig(force_fail_all=True, abort_threshold=10**9)
        res = three_pass_histogram(s, n=512, seed=8, config=cfg)
        assert res.failed == set(res.hists)
        assert all(h.full_names for h in res.hists.values())
        assert res.materialize(s) == oracle(s)

    def test_force_fail_all_aborts_with_default_threshold(self):
        with pytest.raises(Aborted):
            three_pass_histogram(np.arange(100), n=128, seed=0,
                                 config=ThreePassConfig(force_fail_all=True))

    def test_empty_stream(self):
        res = three_pass_histogram(StreamSource(np.zeros(0, dtype=np.int64), 100), n=16, seed=0)
        assert res.hists == {} and res.materialize(np.zeros(0)) == {}

    def test_oracle_equivalence_500_streams(self):
        mismatches = []
        runs = 0
        for n, dup in product([2**10, 2**12, 2**14], [0.0, 0.3, 0.9]):
            count = 56 if n < 2**14 else 55
            for t in range(count):
                if runs == 500:
                    break
                runs += 1
                s = generate_stream(n, dup_rate=dup, seed=1000 * n + t)
                res = three_pass_histogram(s, n=n, seed=t)
                if res.materialize(s) != oracle(s):
                    mismatches.append(audit_three_pass(s, res))
        assert runs == 500
        # a mismatch is only tolerated when verification accepted a colliding bucket
        assert all(a["false_accepts"] for a in mismatches)
        assert len(mismatches) <= 2

    def test_light_bucket_predicate(self):
        n = 2**14
        bound = light_bucket_bound(n)
        ok = 0
        for seed in range(100):
            s = generate_stream(n, dup_rate=0.3, seed=seed)
            ok += int(bucket_distinct_counts(make_plan(n, n * n, seed), s).max() <= bound)
        assert ok >= 99

    def test_few_collisions_predicate(self):
        n = 2**14
        threshold = default_abort_threshold(n)
        ok = 0
        for seed in range(100):
            s = generate_stream(n, dup_rate=0.0, seed=seed)
            ok += int(len(fingerprint_collision_buckets(make_plan(n, n * n, seed), s)) < threshold)
        assert ok >= 99


class TestCandidateEnumeration:
    def test_count_formula_matches_brute_force(self):
        for U, s, B in product(range(1, 9), range(0, 4), range(1, 4)):
            brute = sum(1 for _ in enumerate_candidates(U, s, B))
            assert candidate_count(U, s, B) == brute
            assert candidate_count_bound(U, s, B) >= brute

    def test_order_is_canonical_and_deterministic(self):
        a = list(enumerate_candidates(5, 2, 2))
        assert a == list(enumerate_candidates(5, 2, 2))
        assert a[0] == ((), ())
        assert a[1] == ((0,), (-2,))
        assert a[4] == ((0,), (2,))
        assert a[5] == ((1,), (-2,))
        keys = [(len(sup), sup, cs) for sup, cs in a]
        assert keys == sorted(keys)

    def test_polynomial_invariants(self):
        with pytest.raises(InvalidParam):
            DiscrepancyPolynomial({1: 1, 2: 1}, sparsity_bound=1)
        with pytest.raises(InvalidParam):
            DiscrepancyPolynomial({1: 5}, coeff_bound=3)
        assert DiscrepancyPolynomial({1: 0, 2: 3}).coeffs == {2: 3}


class TestTwoPass:
    def plan(self, n=24, U=8, seed=0, **kw):
        return make_plan(n, U, seed, ThreePassConfig(**kw))

    def test_zero_discrepancy(self):
        s = np.arange(6)
        plan = self.plan(U=6)
        assert not fingerprint_collision_buckets(plan, s)
        res = two_pass_histogram(StreamSource(s, 6), n=24, sparsity=2, coeff_bound=3, plan=plan)
        assert res.info["res"] == 0
        assert res.info["discrepancy"].is_zero() and res.info["candidates_tried"] == 1
        assert res.relocated == {} and res.materialize(s) == oracle(s)
        assert res.passes == 2

    def test_rigged_collision_recovered(self):
        s = np.array([0, 1, 2, 3, 4, 5])
        plan = self.plan(U=6)
        rig_collision(plan, 2, 4)
        res = two_pass_histogram(StreamSource(s, 6), n=24, sparsity=2, coeff_bound=3, plan=plan)
        delta = res.info["discrepancy"]
        # the shadowed element 4 is over-represented in TrueSum, the first-seen 2 in HistSum
        assert delta.coeffs == {4: 1, 2: -1}
        assert delta == oracle_discrepancy(s, plan)
        assert res.materialize(s) == oracle(s)
        assert 4 in res.relocated

    def test_three_way_collision_with_multiplicities(self):
        s = np.array([1, 5, 1, 7, 5, 1, 3])
        plan = self.plan(U=8)
        rig_collision(plan, 1, 5)
        rig_collision(plan, 1, 7)
        res = two_pass_histogram(StreamSource(s, 8), n=24, sparsity=3, coeff_bound=3, plan=plan)
        assert res.info["discrepancy"].coeffs == {1: -3, 5: 2, 7: 1}
        assert res.materialize(s) == oracle(s)

    def test_fingerprint_space_exhausted_uses_name(self):
        s = np.array([0, 1, 2, 2])
        plan = make_plan(24, 4, 0, ThreePassConfig(num_buckets=1, fingerprint_width=1))
        plan.force_fingerprint(0, 0)
        plan.force_fingerprint(1, 1)
        plan.force_fingerprint(2, 0)
        res = two_pass_histogram(StreamSource(s, 4), n=24, sparsity=2, coeff_bound=3, plan=plan)
        assert res.relocated[2] == ("name", 2)
        assert res.materialize(s) == oracle(s)

    def test_enumeration_cap(self):
        with pytest.raises(EnumerationCapExceeded):
            two_pass_histogram(StreamSource(np.arange(6), 8), n=24, sparsity=3, coeff_bound=3,
                               config=TwoPassConfig(enum_cap=10))

    def test_no_candidate_matches(self):
        s = np.array([0, 1])
        plan = self.plan(U=4)
        rig_collision(plan, 0, 1)
        with pytest.raises(NoCandidateMatched):
            two_pass_histogram(StreamSource(s, 4), n=24, sparsity=0, coeff_bound=1, plan=plan)

    def test_default_field_size(self):
        res = two_pass_histogram(StreamSource(np.arange(4), 4), n=10, sparsity=1, coeff_bound=1)
        assert res.verify_q == sympy.nextprime(3**10)

    def test_tiny_field_fails_measurably(self):
        s = np.array([0, 1, 2, 3, 4, 5])
        failures = 0
        trials = 200
        for seed in range(trials):
            plan = self.plan(U=6, seed=seed)
            rig_collision(plan, 2, 4)
            try:
                res = two_pass_histogram(StreamSource(s, 6), n=24, sparsity=2, coeff_bound=3,
                                         seed=seed, plan=plan, config=TwoPassConfig(q=5))
                failures += res.materialize(s) != oracle(s)
            except NoCandidateMatched:
                failures += 1
        rate = failures / trials
        assert 0 < rate <= min(1.0, candidate_count(6, 2, 3) / 5)


class TestTreeShape:
    def test_level_sizes(self):
        assert level_sizes(2**16, 3) == [65536, 16, 4, 2]
        assert max_depth(2**16) == 3
        with pytest.raises(DepthTooLarge):
            level_sizes(2**16, 4)

    def test_config(self):
        cfg = build_tree_config(2**16, 2)
        assert cfg.degrees == [1, 4, 4096]
        assert cfg.num_leaves == 2**14 and cfg.level_counts == [2**14, 2**12, 1]
        assert cfg.heavy_leaf == 4**5
        for ell, q in enumerate(cfg.primes):
            L = cfg.level_sizes[cfg.r - ell - 1]
            assert L**5 <= q <= 2 * L**5 and sympy.isprime(q)
        assert all(R <= 2**64 for R in cfg.fp_ranges)
        assert cfg.passes == 5

    def test_ancestors(self):
        cfg = build_tree_config(2**16, 2)
        leaves = np.array([0, 3, 4, 16383])
        assert cfg.ancestor(leaves, 1).tolist() == [0, 0, 1, 4095]
        assert cfg.ancestor(leaves, 2).tolist() == [0, 0, 0, 0]
        assert list(cfg.leaves_under(1, 1)) == [4, 5, 6, 7]


class TestRPass:
    def test_r1_matches_three_pass_and_oracle(self):
        n = 2**12
        s = generate_stream(n, dup_rate=0.3, seed=3)
        res = r_pass_histogram(StreamSource(s, n * n), n=n, r=1, seed=3)
        assert res.passes == 3
        three = three_pass_histogram(s, n=n, seed=3)
        assert res.materialize(s) == three.materialize(s) == oracle(s)

    def test_r2_passes_and_oracle(self):
        n = 2**12
        s = generate_stream(n, dup_rate=0.5, seed=4)
        res = r_pass_histogram(StreamSource(s, n * n), n=n, r=2, seed=4)
        assert res.passes == 5 and res.materialize(s) == oracle(s)

    def test_heavy_leaf_marked_and_rebuilt(self):
        n = 2**12
        s = np.concatenate([np.full(1100, 9), np.arange(100, 400)])
        cfg = build_tree_config(n, 2)
        state = TreeState(cfg, n * n, seed=1)
        res = r_pass_histogram(StreamSource(s, n * n), n=n, state=state)
        leaf = state.bucket_of(9)
        assert leaf in state.heavy[0] and leaf in state.failed[0]
        assert state.version[leaf] >= 1
        assert res.materialize(s) == oracle(s)

    def test_huge_fields_no_rebuild(self):
        n = 2**12
        big = sympy.nextprime(2**127)
        cfg = build_tree_config(n, 2, primes=[big, big])
        s = generate_stream(n, dup_rate=0.2, seed=6)
        res = r_pass_histogram(StreamSource(s, n * n), n=n, config=cfg, seed=6)
        assert res.info["rebuilt"] == [0, 0]
        assert res.info["failed"] == [[], []]

    def test_rigged_fingerprint_collision_rebuilt(self):
        n = 2**12
        cfg = build_tree_config(n, 1)
        state = TreeState(cfg, n * n, seed=2)
        state.force_leaf(11, state.bucket_of(10))
        state.force_fingerprint(11, int(state.g[0](10)), k=0)
        s = np.array([10, 10, 11, 12, 13])
        res = r_pass_histogram(StreamSource(s, n * n), n=n, state=state)
        leaf = state.bucket_of(10)
        assert state.failed[0] == {leaf}
        assert state.version[leaf] == 1
        assert res.info["rebuilt"][0] >= 1
        assert res.materialize(s) == oracle(s)

    def test_depth_too_large(self):
        with pytest.raises(DepthTooLarge):
            r_pass_histogram(np.arange(10), n=2**16, r=4)


class TestMasses:
    def test_leaf_values(self):
        cfg = build_tree_config(2**12, 2)
        state = TreeState(cfg, 2**24, seed=0)
        from streamf2.histverify import FingerprintHistogram
        h = FingerprintHistogram(64)
        h.add(1, 3)
        h.add(2, 1)
        state.hists[5] = h
        assert compute_M(state, 5, 0) == 4 and compute_D(state, 5, 0) == 2
        assert compute_M(state, 7, 0) == 0 and compute_D(state, 7, 0) == 0

    def test_internal_node_sums_children(self):
        n = 2**12
        s = generate_stream(n, dup_rate=0.4, seed=1)
        res = r_pass_histogram(StreamSource(s, n * n), n=n, r=2, seed=1)
        state, cfg = res.plan, res.plan.cfg
        for v in range(5):
            kids = range(v * cfg.degrees[1], (v + 1) * cfg.degrees[1])
            assert compute_M(state, v, 1) == sum(compute_M(state, u, 0) for u in kids)
            assert compute_D(state, v, 1) == oracle_D(state, v, 1, s)
        assert compute_M(state, 0, 2) == n


class TestMemoryReport:
    def test_empty_stream(self):
        res = three_pass_histogram(StreamSource(np.zeros(0, dtype=np.int64), 256), n=16, seed=0)
        rep = memory_report(res)
        assert rep["hashes"].total > 0
        assert all(v.total == 0 for k, v in rep.items() if k != "hashes")

    def test_fingerprint_bits_bound_at_2_16(self):
        n = 2**16
        s = generate_stream(n, seed=1)
        res = three_pass_histogram(s, n=n, seed=1)
        assert not res.failed
        rep = memory_report(res)
        assert rep["fingerprints"].total <= n * 10 * log2(log2(n))
        entries = sum(len(h) for h in res.hists.values())
        assert rep["fingerprints"].total == entries * ceil(10 * log2(16))

    def test_full_name_bits_two_failed_buckets(self):
        n = 2**10
        s = generate_stream(n, dup_rate=0.2, seed=3)
        plan = make_plan(n, n * n, seed=3)
        distinct = np.unique(s)
        xs = [int(v) for v in distinct[:4]]
        rig_collision(plan, xs[0], xs[1])
        rig_collision(plan, xs[2], xs[3])
        assert plan.bucket_of(xs[0]) != plan.bucket_of(xs[2])
        res = three_pass_histogram(StreamSource(s, n * n), n=n, plan=plan,
                                   config=ThreePassConfig(abort_threshold=10))
        assert len(res.failed) == 2
        entries = sum(len(res.hists[j]) for j in res.failed)
        assert all(entries_ <= light_bucket_bound(n) for entries_ in
                   (len(res.hists[j]) for j in res.failed))
        assert memory_report(res)["full_names"].total == entries * ceil(log2(n * n))
        assert res.materialize(s) == oracle(s)

    def test_tree_widths_classes(self):
        n = 2**12
        s = np.concatenate([np.full(1100, 9), np.arange(100, 400)])
        res = r_pass_histogram(StreamSource(s, n * n), n=n, r=2, seed=1)
        rep = memory_report(res)
        assert rep["counters"].total == s.size
        assert rep["accumulators"].total > 0
