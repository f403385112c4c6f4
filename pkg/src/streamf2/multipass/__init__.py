from .memory import memory_report, total_bits
from .plan import BucketingPlan, HistogramResult, build_histograms, lg
from .three_pass import (ThreePassConfig, audit_three_pass, bucket_distinct_counts,
                         fingerprint_collision_buckets, light_bucket_bound, make_plan,
                         three_pass_histogram)
from .tree import (TreeConfig, TreeState, build_tree_config, compute_D, compute_M, heavy_nodes,
                   level_sizes, max_depth, oracle_D, r_pass_histogram)
from .two_pass import (DiscrepancyPolynomial, TwoPassConfig, candidate_count,
                       candidate_count_bound, enumerate_candidates, oracle_discrepancy, recover,
                       two_pass_histogram, two_pass_prime)
