"""Streaming second-moment estimation, exact multipass histograms and set-intersection protocols."""
from .errors import *  # noqa: F401,F403
from .f2 import F2Config, F2Sketch, exact_f2, f2_estimate, f2_feed, f2_trial_estimates
from .field import FieldModulus, HashBank, KWiseHash, PRFHash, find_prime_in, kwise_eval, kwise_new
from .histverify import FingerprintHistogram, VerifyAccumulators, verify_bucket, verify_decide, verify_step
from .multiset import BitBudget, CompactMultiset
from .seeding import derive_seed
from .streams import StreamSource, generate_stream

__version__ = "0.1.0"
