"""Block-uniform sets, a small design family and the distinguishing rate."""
from streamf2.errors import BudgetExhausted
from streamf2.instances import (P0_TARGET, BlockUniformParams, build_design, disjoint_pair,
                                distinguishing_experiment)

params = BlockUniformParams(2**10, 2**5)
try:
    build_design(params, 4, seed=0)
except BudgetExhausted as e:
    print(f"cap n/400 is infeasible here; kept {len(e.family)} set(s), feasible cap {e.feasible_cap}")
fam = build_design(params, 4, seed=0, max_pairwise=49)
print(f"design of {len(fam)} sets, largest pairwise overlap {fam.pairwise_max()}")

for k in (8, 10, 12):
    params = BlockUniformParams(2**k, 2**(k // 3))
    X, X2 = disjoint_pair(params, seed=k)
    res = distinguishing_experiment(params, X, X2, 10**4, seed=k)
    print(f"n=2^{k} block={params.block_size}: rate {res.rate:.4f} (target {P0_TARGET:.4f})")
