"""Exact histograms in three, two and 2r+1 passes, with their memory ledgers."""
from collections import Counter

import numpy as np

from streamf2.multipass import (make_plan, memory_report, r_pass_histogram, three_pass_histogram,
                                total_bits, two_pass_histogram)
from streamf2.streams import StreamSource, generate_stream

n = 2**14
s = generate_stream(n, dup_rate=0.3, seed=7)
truth = dict(Counter(s.tolist()))

res = three_pass_histogram(s, n=n, seed=1)
print("three-pass exact:", res.materialize(s) == truth, " failed buckets:", len(res.failed))
for k, b in memory_report(res).items():
    print(f"  {k:24s} {b.total:>10.0f} bits")

for r in (1, 2):
    res = r_pass_histogram(StreamSource(s, n * n), n=n, r=r, seed=1)
    print(f"r={r}: {res.passes} passes, exact={res.materialize(s) == truth}, "
          f"bits={total_bits(memory_report(res))}")

# a toy stream where two elements are forced to share a bucket and fingerprint
toy = np.array([0, 1, 2, 3, 4, 4, 5])
plan = make_plan(24, 8, seed=0)
plan.force_bucket(4, plan.bucket_of(2))
plan.force_fingerprint(4, plan.fingerprint_of(2))
res = two_pass_histogram(StreamSource(toy, 8), n=24, sparsity=2, coeff_bound=3, plan=plan)
print("two-pass discrepancy:", res.info["discrepancy"].coeffs,
      "after", res.info["candidates_tried"], "candidates; exact:",
      res.materialize(toy) == dict(Counter(toy.tolist())))
