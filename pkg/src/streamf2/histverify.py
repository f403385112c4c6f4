"""One-pass verification of a claimed fingerprint histogram.

For a substream ``S`` and a histogram ``H`` of its fingerprints, compare at a
random point two linear forms over ``F_q``:

* ``TrueSum = sum over stream positions of z[x]``
* ``HistSum = sum over positions of z[first(x)]``, where ``first(x)`` is the
  earliest element sharing ``x``'s fingerprint.

The first is accumulated directly. The second equals adding
``z[x] * H[fp(x)]`` the first time each fingerprint shows up, which is what
the per-entry ``first_seen`` flag tracks. Without fingerprint collisions the
forms are identical. Otherwise their difference is a non-zero degree-1
polynomial, which vanishes at a uniform point with probability at most ``1/q``.
"""
from dataclasses import dataclass

from .errors import UnknownFingerprint


class FingerprintHistogram:
    """``fingerprint -> [count, first_seen]`` for one bucket.

    Keys are usually fingerprints; a rebuilt (failed) bucket uses full element
    names as keys and sets ``full_names``.
    """

    def __init__(self, fingerprint_width_bits, full_names=False):
        self.fingerprint_width_bits = fingerprint_width_bits
        self.full_names = full_names
        self.entries = {}

    def add(self, key, times=1):
        e = self.entries.get(key)
        if e is None:
            self.entries[key] = [times, False]
        else:
            e[0] += times

    def count(self, key):
        e = self.entries.get(key)
        return 0 if e is None else e[0]

    def __contains__(self, key):
        return key in self.entries

    def __len__(self):
        return len(self.entries)

    def total(self):
        return sum(e[0] for e in self.entries.values())

    def reset_flags(self):
        for e in self.entries.values():
            e[1] = False

    def as_list(self):
        return [(k, e[0], e[1]) for k, e in self.entries.items()]

    def __repr__(self):
        return f"FingerprintHistogram({len(self)} entries, width={self.fingerprint_width_bits})"


@dataclass
class VerifyAccumulators:
    q: int
    acc_true: int = 0
    acc_hist: int = 0


def verify_step(acc, x, fp, hist, h, hx=None):
    """Feed one stream element ``x`` (with fingerprint ``fp``) to the verifier.

    ``hx`` may carry a precomputed ``h(x)``.
    """
    if hx is None:
        hx = h(x)
    q = acc.q
    acc.acc_true = (acc.acc_true + hx) % q
    e = hist.entries.get(fp)
    if e is None:
        raise UnknownFingerprint(fp)
    if not e[1]:
        e[1] = True
        acc.acc_hist = (acc.acc_hist + hx * e[0]) % q
    return acc


def verify_decide(acc):
    return acc.acc_true == acc.acc_hist


def verify_bucket(elements, fingerprints, hist, h, q=None):
    """Run a full verification pass over one bucket's substream.

    Flags are reset before and after, so verifying twice gives the same answer.
    Returns False when the stream carries a fingerprint the histogram lacks.
    """
    q = q if q is not None else h.range
    acc = VerifyAccumulators(q)
    hist.reset_flags()
    try:
        for x, fp in zip(elements, fingerprints):
            verify_step(acc, x, fp, hist, h)
    except UnknownFingerprint:
        return False
    finally:
        hist.reset_flags()
    return verify_decide(acc)
