"""Bit ledger for a finished multipass run.

Categories:

* ``fingerprints[w=<bits>]``: entries keyed by a ``w``-bit fingerprint, one class per width
* ``full_names``: entries keyed by the element itself, ``ceil(log2 |U|)`` bits each
* ``counters``: counts written in unary, i.e. their sum
* ``flags``: one first-seen bit per entry
* ``hashes``: hash descriptions
* ``accumulators``: two field elements per verified bucket (peak over passes)
"""
from math import ceil, log2

from ..multiset import BitBudget


def _name_bits(universe):
    return max(1, ceil(log2(max(universe, 2))))


def memory_report(result):
    """Per-category :class:`BitBudget` totals for a :class:`HistogramResult`."""
    plan = result.plan
    name_bits = _name_bits(plan.universe)
    fp = {}
    full = counters = flags = 0
    for key_hist in result.hists.values():
        entries = len(key_hist)
        counters += key_hist.total()
        flags += entries
        if key_hist.full_names:
            full += entries * name_bits
            continue
        w = key_hist.fingerprint_width_bits
        named = sum(1 for k in key_hist.entries if isinstance(k, tuple))
        full += named * name_bits
        fp[w] = fp.get(w, 0) + (entries - named) * w

    out = {f"fingerprints[w={w}]": BitBudget(bits, label=f"fingerprints[w={w}]")
           for w, bits in sorted(fp.items())}
    out["fingerprints"] = BitBudget(sum(fp.values()), label="fingerprints")
    out["full_names"] = BitBudget(full, label="full_names")
    out["counters"] = BitBudget(counters, label="counters")
    out["flags"] = BitBudget(flags, label="flags")
    out["hashes"] = BitBudget(sum(plan.hash_bits.values()), label="hashes")
    out["accumulators"] = BitBudget(_accumulator_bits(result), label="accumulators")
    return out


def _accumulator_bits(result):
    if not result.hists:
        return 0
    cfg = getattr(result.plan, "cfg", None)
    if cfg is not None:
        # tree: one pair per node of the verified level, space reused across steps
        return max(2 * q.bit_length() * cfg.level_counts[i] for i, q in enumerate(cfg.primes))
    if result.verify_q is None:
        return 0
    per = 2 * result.verify_q.bit_length()
    return per if result.algorithm == "2pass" else per * len(result.hists)


def total_bits(report, include_hashes=True):
    keys = ["fingerprints", "full_names", "counters", "flags", "accumulators"]
    if include_hashes:
        keys.append("hashes")
    return sum(report[k].total for k in keys)
