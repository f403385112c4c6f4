"""Run reports: per-trial rows, aggregates, JSON-lines and CSV files, model fits.

A report file is JSON lines: one summary object (``"kind": "summary"``)
followed by one object per row (``"kind": "row"``). Every object is dumped
with sorted keys, so save -> load -> save is byte-identical. The only
time-dependent value is the summary's ``created`` field.
"""
import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from math import log2, sqrt

import numpy as np

from .errors import AggregateMismatch, EmptyInput, InsufficientSpan, StreamFormatError

SCHEMA_VERSION = 1
REL_TOL = 1e-12


class Welford:
    """One-pass mean and sample variance."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, x):
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self._m2 += d * (x - self.mean)
        return self

    @property
    def variance(self):
        return self._m2 / (self.count - 1) if self.count > 1 else 0.0


def _row_failed(row):
    if row.get("aborted"):
        return True
    ok = row.get("ok")
    return ok is not None and not ok


def aggregate(rows, key="estimate"):
    """Mean, sample variance and quantiles of ``row[key]`` plus failure and abort rates.

    Aborted rows count as failures and are left out of the moments.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInput("cannot aggregate zero rows")
    w = Welford()
    vals = []
    for r in rows:
        v = r.get(key)
        if v is None or r.get("aborted"):
            continue
        w.push(float(v))
        vals.append(float(v))
    bits = [float(r["bits"]) for r in rows if isinstance(r.get("bits"), (int, float))]
    out = {
        "count": len(rows),
        "valid": w.count,
        "mean": w.mean if w.count else None,
        "variance": w.variance if w.count else None,
        "failure_rate": sum(_row_failed(r) for r in rows) / len(rows),
        "abort_rate": sum(bool(r.get("aborted")) for r in rows) / len(rows),
        "mean_bits": float(np.mean(bits)) if bits else None,
    }
    if vals:
        q = np.quantile(vals, [0.05, 0.5, 0.95])
        out.update(q05=float(q[0]), q50=float(q[1]), q95=float(q[2]))
    return out


def _close(a, b):
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b) <= REL_TOL * max(abs(a), abs(b), 1e-300) or a == b
    return a == b


def aggregates_match(stored, fresh):
    return stored.keys() == fresh.keys() and all(_close(stored[k], fresh[k]) for k in stored)


def histogram_digest(hist):
    """64-bit blake2b digest (hex) of the sorted ``(element, count)`` pairs."""
    h = hashlib.blake2b(digest_size=8)
    for x, c in sorted((int(k), int(v)) for k, v in hist.items()):
        h.update(f"{x}:{c}\n".encode())
    return h.hexdigest()


@dataclass
class RunReport:
    run_id: str
    algorithm: str
    params: dict
    rows: list = field(default_factory=list)
    aggregates: dict = None
    key: str = "estimate"
    created: float = None
    schema_version: int = SCHEMA_VERSION

    def add(self, row):
        self.rows.append(dict(row))
        return self

    def finalize(self):
        self.aggregates = aggregate(self.rows, self.key) if self.rows else {}
        if self.created is None:
            self.created = time.time()
        return self

    def summary(self):
        return {"kind": "summary", "schema_version": self.schema_version, "run_id": self.run_id,
                "algorithm": self.algorithm, "params": self.params,
                "aggregates": self.aggregates, "key": self.key, "created": self.created}

    def to_jsonl(self):
        if self.aggregates is None:
            self.finalize()
        lines = [json.dumps(self.summary(), sort_keys=True)]
        lines += [json.dumps({"kind": "row", **r}, sort_keys=True) for r in self.rows]
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_jsonl())
        return path

    @classmethod
    def from_jsonl(cls, text, check=True):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise StreamFormatError("empty report")
        try:
            objs = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as e:
            raise StreamFormatError(f"bad report line: {e}") from None
        head = objs[0]
        if head.get("kind") != "summary":
            raise StreamFormatError("first line must be the summary")
        rows = []
        for o in objs[1:]:
            if o.pop("kind", None) != "row":
                raise StreamFormatError("expected a row line")
            rows.append(o)
        rep = cls(head["run_id"], head["algorithm"], head["params"], rows, head["aggregates"],
                  head.get("key", "estimate"), head.get("created"), head["schema_version"])
        if check and rows:
            fresh = aggregate(rows, rep.key)
            if not aggregates_match(rep.aggregates, fresh):
                raise AggregateMismatch("stored aggregates do not match the rows")
        return rep

    @classmethod
    def load(cls, path, check=True):
        with open(path) as f:
            return cls.from_jsonl(f.read(), check)

    def to_csv(self, path):
        flat = [_flatten(r) for r in self.rows]
        cols = sorted({k for r in flat for k in r})
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=cols)
            w.writeheader()
            for r in flat:
                w.writerow(r)
        return path


def _flatten(row, prefix=""):
    out = {}
    for k, v in row.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, name + "."))
        elif isinstance(v, (list, tuple)):
            out[name] = json.dumps(v)
        else:
            out[name] = v
    return out


# -- growth-model fits ----------------------------------------------------------

MODELS = {
    "n": lambda n: n,
    "n log n": lambda n: n * log2(n),
    "n log log n": lambda n: n * log2(log2(n)),
}


def slope_check(points, model):
    """Normalised residual of the best fit ``bits ~ a * model(n)`` through the origin.

    Needs at least 4 points spanning at least two decades of ``n``.
    """
    if model not in MODELS:
        raise KeyError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
    pts = sorted((float(n), float(b)) for n, b in points)
    if len(pts) < 4 or pts[-1][0] < 100 * pts[0][0]:
        raise InsufficientSpan("need >= 4 points spanning >= 2 decades of n")
    x = np.array([MODELS[model](n) for n, _ in pts])
    y = np.array([b for _, b in pts])
    a = float(x @ y / (x @ x))
    return float(sqrt(np.sum((y - a * x) ** 2) / np.sum(y * y)))


def rank_models(points):
    """``[(residual, model), ...]`` best first."""
    return sorted((slope_check(points, m), m) for m in MODELS)
