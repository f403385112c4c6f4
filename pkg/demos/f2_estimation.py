"""Estimate F2 of a few streams and compare the spread with the predicted variance.

On skewed streams the variance comes mostly from rare collisions between heavy
elements, so a few thousand draws usually show a smaller spread than predicted.
"""
import numpy as np

from streamf2.f2 import F2Config, estimator_variance, exact_f2, f2_config_m, f2_trial_estimates, trial_seeds
from streamf2.streams import generate_stream

n = 10**4
cfg = F2Config(epsilon=0.05, universe_size=n * n)
m = f2_config_m(cfg)
print(f"n={n} eps={cfg.epsilon} table size m={m}")
for dup in (0.0, 0.5, 0.9):
    s = generate_stream(n, dup_rate=dup, seed=1)
    est = f2_trial_estimates(s, cfg, trial_seeds(0, 2000))
    f2 = exact_f2(s)
    print(f"dup={dup:.1f}  F2={f2:>10}  mean={est.mean():12.1f}  "
          f"sd={est.std(ddof=1):9.1f}  predicted sd={np.sqrt(estimator_variance(s, m)):9.1f}")
