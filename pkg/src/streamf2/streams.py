"""Replayable stream sources and the on-disk stream / set-pair formats.

Text stream::

    streamv1 n=<N> universe=<U>
    <element>
    ...

Binary stream: the header line ``streambin1 n=<N> universe=<U>`` followed by
N little-endian unsigned 8-byte elements.

Set pair::

    setpairv1 universe=<U>
    A: <sorted elements separated by spaces>
    B: <sorted elements separated by spaces>
"""
from pathlib import Path

import numpy as np

from .errors import InvalidParam, StreamFormatError

DEFAULT_CHUNK = 1 << 16


def generate_stream(n, universe=None, dup_rate=0.0, seed=0):
    """Random stream of length ``n``.

    Each position after the first repeats an earlier position's value with
    probability ``dup_rate`` (chosen uniformly among earlier positions) and is
    otherwise a fresh element, distinct from all others. ``dup_rate=1`` gives
    ``n`` copies of one element.
    """
    if universe is None:
        universe = max(n * n, 1)
    if not 0.0 <= dup_rate <= 1.0:
        raise InvalidParam("dup_rate must be in [0, 1]")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rng = np.random.default_rng(seed)
    dup = rng.random(n) < dup_rate
    dup[0] = False
    fresh = int((~dup).sum())
    if fresh > universe:
        raise InvalidParam("universe too small for the requested distinct count")
    values = np.zeros(n, dtype=np.int64)
    values[~dup] = rng.choice(universe, size=fresh, replace=False)
    idx = np.arange(n)
    src = idx.copy()
    src[dup] = np.floor(rng.random(int(dup.sum())) * idx[dup]).astype(np.int64)
    # pointer jumping resolves chains of repeats back to a fresh position
    while True:
        nxt = src[src]
        if np.array_equal(nxt, src):
            break
        src = nxt
    return values[src]


class StreamSource:
    """A stream that can be replayed pass after pass with identical contents.

    ``passes`` counts how many times the stream was read from the start.
    """

    def __init__(self, data=None, universe=None, path=None):
        self._data = None if data is None else np.asarray(data, dtype=np.int64)
        self._path = None if path is None else Path(path)
        self.passes = 0
        if self._path is not None:
            n, u, _ = _read_header(self._path)
            self.length = n
            self.universe = universe or u
        else:
            self.length = int(self._data.size)
            if universe is None:
                universe = max(self.length * self.length, int(self._data.max()) + 1 if self.length else 1)
            self.universe = int(universe)

    @classmethod
    def generator(cls, n, universe=None, dup_rate=0.0, seed=0):
        return cls(generate_stream(n, universe, dup_rate, seed),
                   universe=universe or max(n * n, 1))

    @classmethod
    def from_file(cls, path):
        return cls(path=path)

    def chunks(self, size=DEFAULT_CHUNK):
        """One pass over the stream, as int64 arrays of at most ``size`` elements."""
        self.passes += 1
        if self._data is not None:
            for lo in range(0, self.length, size):
                yield self._data[lo:lo + size]
        else:
            yield from _iter_file_chunks(self._path, size)

    def __iter__(self):
        for chunk in self.chunks():
            yield from chunk.tolist()

    def to_array(self):
        if self._data is not None:
            return self._data
        parts = list(_iter_file_chunks(self._path, DEFAULT_CHUNK))
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def __len__(self):
        return self.length


def as_source(stream, universe=None):
    if isinstance(stream, StreamSource):
        return stream
    return StreamSource(np.asarray(stream, dtype=np.int64), universe=universe)


def _parse_kv(parts):
    out = {}
    for p in parts:
        if "=" not in p:
            raise StreamFormatError(f"bad header field {p!r}")
        k, v = p.split("=", 1)
        out[k] = int(v)
    return out


def _read_header(path):
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii").split()
    if not line or line[0] not in ("streamv1", "streambin1"):
        raise StreamFormatError(f"{path}: not a stream file")
    kv = _parse_kv(line[1:])
    if "n" not in kv or "universe" not in kv:
        raise StreamFormatError(f"{path}: header needs n= and universe=")
    return kv["n"], kv["universe"], line[0]


def _iter_file_chunks(path, size):
    n, universe, kind = _read_header(path)
    with open(path, "rb") as fh:
        fh.readline()
        if kind == "streambin1":
            read = 0
            while read < n:
                k = min(size, n - read)
                buf = fh.read(8 * k)
                if len(buf) != 8 * k:
                    raise StreamFormatError(f"{path}: truncated binary stream")
                yield np.frombuffer(buf, dtype="<u8").astype(np.int64)
                read += k
            return
        batch = []
        count = 0
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            try:
                v = int(raw)
            except ValueError:
                raise StreamFormatError(f"{path}: malformed element {raw!r}") from None
            if not 0 <= v < universe:
                raise StreamFormatError(f"{path}: element {v} outside universe {universe}")
            batch.append(v)
            count += 1
            if len(batch) == size:
                yield np.array(batch, dtype=np.int64)
                batch = []
        if batch:
            yield np.array(batch, dtype=np.int64)
        if count != n:
            raise StreamFormatError(f"{path}: header says {n} elements, found {count}")


def write_stream(path, stream, universe, binary=False):
    stream = np.asarray(stream, dtype=np.int64)
    head = f"{'streambin1' if binary else 'streamv1'} n={stream.size} universe={universe}\n"
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        if binary:
            fh.write(stream.astype("<u8").tobytes())
        else:
            fh.write("".join(f"{v}\n" for v in stream.tolist()).encode("ascii"))


def write_setpair(path, A, B, universe):
    A = sorted(int(a) for a in A)
    B = sorted(int(b) for b in B)
    with open(path, "w") as fh:
        fh.write(f"setpairv1 universe={universe}\n")
        fh.write("A: " + " ".join(map(str, A)) + "\n")
        fh.write("B: " + " ".join(map(str, B)) + "\n")


def read_setpair(path):
    """Returns ``(A, B, universe)`` with A and B as sorted lists."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(lines) != 3 or not lines[0].startswith("setpairv1"):
        raise StreamFormatError(f"{path}: not a setpairv1 file")
    universe = _parse_kv(lines[0].split()[1:]).get("universe")
    sets = {}
    for ln in lines[1:]:
        tag, _, body = ln.partition(":")
        if tag not in ("A", "B"):
            raise StreamFormatError(f"{path}: unexpected line {ln!r}")
        try:
            vals = [int(t) for t in body.split()]
        except ValueError:
            raise StreamFormatError(f"{path}: malformed set line") from None
        if vals != sorted(set(vals)):
            raise StreamFormatError(f"{path}: set {tag} is not sorted and distinct")
        sets[tag] = vals
    if set(sets) != {"A", "B"}:
        raise StreamFormatError(f"{path}: need both A and B")
    return sets["A"], sets["B"], universe
