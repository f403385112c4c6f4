"""Approximate |A ∩ B| with the four protocols and report error and communication."""
import numpy as np

from streamf2.protocols import PROTOCOLS, ghd_blowup, random_setpair

n, eps = 10**4, 0.2
A, B = random_setpair(n, 0.3, seed=3)
print(f"n={n} eps={eps} truth={len(set(A.elements) & set(B.elements))}")
for name, fn in PROTOCOLS.items():
    errs, bits = [], []
    for seed in range(50):
        out, t = fn(A, B, eps, seed=seed)
        if not out.aborted:
            errs.append(out.error)
        bits.append(t.total_bits)
    print(f"{name:6s} mean |error|={np.mean(errs):8.1f} (eps n={eps * n:.0f})  "
          f"mean bits={np.mean(bits):10.0f}  one-way={t.is_one_way()}")

A, B = ghd_blowup("1100", "1010", 8)
print("GHD 1100 vs 1010 at n=8:", sorted(set(A.elements) & set(B.elements)))
