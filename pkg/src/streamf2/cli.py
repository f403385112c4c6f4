"""Command-line drivers: ``streamf2 {estimate-f2, histogram, protocol, gen}``.

Every run writes a JSON-lines report (see :mod:`streamf2.report`) to
``--out`` or stdout. Algorithm aborts are rows, not failures: the exit code
is 0 unless the arguments, the input files or the program itself are at fault.
"""
import argparse
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from math import ceil

import numpy as np

from .errors import (Aborted, BudgetExhausted, EmptyInput, EnumerationCapExceeded,
                     NoCandidateMatched, StreamF2Error)
from .f2 import F2Config, exact_f2, f2_config_m, f2_trial_estimates, trial_seeds
from .field import kwise_new, prime_at_least
from .instances import (BlockUniformParams, build_design, feasible_cap, write_design)
from .multipass import (ThreePassConfig, TwoPassConfig, build_tree_config, memory_report,
                        r_pass_histogram, three_pass_histogram, total_bits, two_pass_histogram)
from .multiset import ms_info_bits
from .protocols import PROTOCOLS, PartyInput, ghd_blowup, random_setpair
from .report import RunReport, histogram_digest
from .seeding import derive_seed
from .streams import (StreamSource, generate_stream, read_setpair, write_setpair,
                      write_stream)


# -- stream / instance inputs ---------------------------------------------------

def _stream_for(args, trial):
    if args.input:
        return StreamSource.from_file(args.input)
    n = args.n if args.n is not None else args.n_default
    universe = args.universe or max(n * n, 1)
    return StreamSource(generate_stream(n, universe, args.dup_rate,
                                        derive_seed(args.seed, "stream", trial)), universe)


def _instance(args):
    if args.input:
        A, B, universe = read_setpair(args.input)
        n = args.n or max(len(A), len(B), 1)
        return PartyInput(tuple(A), n, universe), PartyInput(tuple(B), n, universe)
    n = args.n if args.n is not None else args.n_default
    return random_setpair(n, args.overlap, args.universe, derive_seed(args.seed, "instance"))


def _n_param(args):
    if args.n is not None:
        return args.n
    return None if args.input else args.n_default


def _map_trials(fn, trials, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(fn, range(trials)))
    else:
        rows = [fn(t) for t in range(trials)]
    return sorted(rows, key=lambda r: r["trial"])


def _emit(report, args):
    report.finalize()
    text = report.to_jsonl()
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if getattr(args, "csv", None):
        report.to_csv(args.csv)
    return report


def _require_trials(args):
    if args.trials < 1:
        raise EmptyInput("--trials must be at least 1")


# -- estimate-f2 ------------------------------------------------------------------

def cmd_estimate_f2(args):
    _require_trials(args)
    src = _stream_for(args, 0)
    stream = src.to_array()
    cfg = F2Config(epsilon=args.eps, constant_c=args.const_c, universe_size=src.universe)
    m = f2_config_m(cfg)
    seeds = trial_seeds(args.seed, args.trials)
    est = f2_trial_estimates(stream, cfg, seeds, src.universe)
    truth = exact_f2(stream)
    p = prime_at_least(max(src.universe, m)).q
    bits = ceil(ms_info_bits(stream.size, m)) + kwise_new(4, src.universe, m, 0, p).description_bits
    rep = RunReport(f"estimate-f2-{args.seed}", "f2",
                    {"n": int(stream.size), "eps": args.eps, "c": args.const_c, "m": m,
                     "seed": args.seed, "trials": args.trials, "universe": src.universe})
    for t, (s, e) in enumerate(zip(seeds, est.tolist())):
        err = abs(e - truth)
        rep.add({"trial": t, "seed": s, "estimate": e, "truth": truth, "error": err,
                 "ok": err <= args.eps * truth, "aborted": False, "bits": bits})
    return _emit(rep, args)


# -- histogram --------------------------------------------------------------------

def _histogram_trial(args, trial):
    src = _stream_for(args, trial)
    seed = derive_seed(args.seed, "histogram", trial)
    n = args.n or max(src.length, 2)
    row = {"trial": trial, "seed": seed, "mode": args.mode, "aborted": False}
    try:
        if args.mode == "3pass":
            cfg = ThreePassConfig(fingerprint_width=args.fp_width)
            if args.abort_frac is not None:
                buckets = max(1, ceil(n / max(1.0, np.log2(n))))
                cfg.abort_threshold = max(1, ceil(args.abort_frac * buckets))
            res = three_pass_histogram(src, n=n, seed=seed, config=cfg)
        elif args.mode == "2pass":
            cfg = TwoPassConfig(enum_cap=args.enum_cap,
                                plan=ThreePassConfig(fingerprint_width=args.fp_width))
            res = two_pass_histogram(src, n=n, sparsity=args.sparsity,
                                     coeff_bound=args.coeff_bound, seed=seed, config=cfg)
        else:
            tcfg = build_tree_config(n, args.r, fp_cap_bits=args.fp_width or 64)
            res = r_pass_histogram(src, n=n, r=args.r, seed=seed, config=tcfg)
    except (Aborted, EnumerationCapExceeded, NoCandidateMatched) as e:
        row.update(aborted=True, ok=False, error=type(e).__name__, detail=str(e),
                   passes=src.passes)
        return row
    stream = src.to_array()
    out = res.materialize(stream)
    oracle = dict(Counter(stream.tolist()))
    ledger = memory_report(res)
    row.update(digest=histogram_digest(out), oracle_digest=histogram_digest(oracle),
               ok=out == oracle, passes=res.passes, failed=len(res.failed),
               bits=total_bits(ledger),
               bits_by_category={k: v.total for k, v in ledger.items()})
    return row


def cmd_histogram(args):
    _require_trials(args)
    rows = _map_trials(partial(_histogram_trial, args), args.trials, args.jobs)
    rep = RunReport(f"histogram-{args.mode}-{args.seed}", args.mode,
                    {"n": _n_param(args), "input": args.input, "mode": args.mode, "r": args.r, "seed": args.seed,
                     "trials": args.trials, "fp_width": args.fp_width,
                     "enum_cap": args.enum_cap, "abort_frac": args.abort_frac},
                    rows, key="bits")
    return _emit(rep, args)


# -- protocol ---------------------------------------------------------------------

def _protocol_trial(args, A, B, trial):
    seed = derive_seed(args.seed, "protocol", trial)
    fn = PROTOCOLS[args.protocol]
    kw = {"seed": seed, "newman": args.newman}
    if args.protocol != "f2red":
        kw["c"] = args.const_c
    out, tr = fn(A, B, args.eps, **kw)
    row = out.row(seed=seed, bits=tr.total_bits)
    row.update(trial=trial, ok=out.within_eps, one_way=tr.is_one_way(),
               error=out.error)
    return row


def cmd_protocol(args):
    _require_trials(args)
    A, B = _instance(args)
    rows = _map_trials(partial(_protocol_trial, args, A, B), args.trials, args.jobs)
    rep = RunReport(f"protocol-{args.protocol}-{args.seed}", args.protocol,
                    {"n": max(A.n_bound, B.n_bound), "eps": args.eps, "c": args.const_c,
                     "seed": args.seed, "trials": args.trials, "universe": A.universe,
                     "newman": args.newman}, rows)
    return _emit(rep, args)


# -- gen --------------------------------------------------------------------------

def cmd_gen(args):
    if not args.out:
        raise EmptyInput("gen needs --out")
    seed = derive_seed(args.seed, f"gen-{args.kind}")
    if args.kind == "stream":
        universe = args.universe or max(args.n * args.n, 1)
        write_stream(args.out, generate_stream(args.n, universe, args.dup_rate, seed),
                     universe, binary=args.binary)
    elif args.kind == "setpair":
        A, B = random_setpair(args.n, args.overlap, args.universe, seed)
        write_setpair(args.out, A.elements, B.elements, A.universe)
    elif args.kind == "ghd":
        A, B = ghd_blowup(args.x, args.y, args.n)
        write_setpair(args.out, A.elements, B.elements, A.universe)
    else:
        params = BlockUniformParams(args.n, args.block_size)
        cap = args.cap if args.cap is not None else feasible_cap(params)
        write_design(args.out, build_design(params, args.target, seed, cap))
    return args.out


# -- argument parsing -------------------------------------------------------------

def _common(p, n_default):
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--n", type=int, default=None,
                   help=f"stream length / set size bound (default {n_default}, or the input file's)")
    p.set_defaults(n_default=n_default)
    p.add_argument("--universe", type=int, default=None)
    p.add_argument("--in", dest="input", default=None, help="input file")
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.add_argument("--csv", default=None, help="also export rows as CSV")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")


def build_parser():
    parser = argparse.ArgumentParser(prog="streamf2", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-f2", help="F2 estimates over many hash seeds")
    _common(p, 10**4)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--const-c", type=float, default=201.0)
    p.add_argument("--dup-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_estimate_f2)

    p = sub.add_parser("histogram", help="exact multipass histograms")
    _common(p, 2**12)
    p.add_argument("--mode", choices=["3pass", "2pass", "rpass"], default="3pass")
    p.add_argument("--dup-rate", type=float, default=0.3)
    p.add_argument("--fp-width", type=int, default=None)
    p.add_argument("--abort-frac", type=float, default=None,
                   help="abort threshold as a fraction of the bucket count")
    p.add_argument("--enum-cap", type=int, default=10**7)
    p.add_argument("--sparsity", type=int, default=3)
    p.add_argument("--coeff-bound", type=int, default=3)
    p.add_argument("--r", type=int, default=1)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("protocol", help="approximate set-intersection protocols")
    p.add_argument("protocol", choices=sorted(PROTOCOLS))
    _common(p, 10**4)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--const-c", type=float, default=40.0)
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--newman", action="store_true", help="charge private-coin overhead")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("gen", help="write streams, set pairs, GHD instances or designs")
    p.add_argument("kind", choices=["stream", "setpair", "ghd", "design"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--universe", type=int, default=None)
    p.add_argument("--dup-rate", type=float, default=0.0)
    p.add_argument("--binary", action="store_true")
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--x", default=None, help="GHD bit string for Alice")
    p.add_argument("--y", default=None, help="GHD bit string for Bob")
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--target", type=int, default=4)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen" and args.kind == "ghd" and (args.x is None or args.y is None):
        parser.error("gen ghd needs --x and --y")
    try:
        args.func(args)
    except EmptyInput as e:
        print(f"streamf2: {e}", file=sys.stderr)
        return 2
    except BudgetExhausted as e:
        print(f"streamf2: {e}; feasible cap is {e.feasible_cap}", file=sys.stderr)
        return 1
    except (StreamF2Error, OSError) as e:
        print(f"streamf2: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
