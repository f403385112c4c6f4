"""Prime fields, prime search and hash families.

Two hash constructions live here:

* :class:`KWiseHash` -- a random polynomial of degree ``k - 1`` over a prime
  field, reduced into ``[0, range)`` by a plain modulo. Any ``k`` distinct
  inputs get independent, uniform field values; the final modulo adds a bias
  of at most ``range / field_prime``, which vanishes when ``range`` equals the
  field prime.
* :class:`PRFHash` -- a keyed counter-mode mixing function used wherever a
  fully random function is assumed (the two-pass and tree algorithms). It is
  a seeded pseudorandom stand-in, not a cryptographic primitive.

Both evaluate scalars exactly with Python ints and arrays with numpy; the two
paths always agree.
"""
from dataclasses import dataclass, field as dc_field, replace
from math import ceil
from types import MappingProxyType

import numpy as np

from .errors import InvalidParam, NoPrimeInRange, OutOfUniverse

WIDTH_CAP = 256

# Deterministic Miller-Rabin witnesses, valid for every n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59,
                 61, 67, 71, 73, 79, 83, 89, 97)
# Wide moduli fall back to 64 rounds with these seeded witnesses.
PRIMALITY_SEED = 0x5EED_F1E1D
PRIMALITY_ROUNDS = 64


def _mr_round(n, d, s, a):
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_prime(n):
    """Miller-Rabin; deterministic below 2**64, 64 seeded rounds above."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < 2**64:
        return all(_mr_round(n, d, s, a) for a in _MR_BASES)
    rng = np.random.default_rng(PRIMALITY_SEED)
    for _ in range(PRIMALITY_ROUNDS):
        a = 2 + int.from_bytes(rng.bytes((n.bit_length() + 7) // 8 + 8), "little") % (n - 3)
        if not _mr_round(n, d, s, a):
            return False
    return True


@dataclass(frozen=True)
class FieldModulus:
    """A prime modulus with the handful of field operations the algorithms need."""

    q: int

    def __post_init__(self):
        if not is_prime(self.q):
            raise InvalidParam(f"{self.q} is not prime")

    @property
    def width(self):
        return self.q.bit_length()

    def add(self, a, b):
        return (a + b) % self.q

    def sub(self, a, b):
        return (a - b) % self.q

    def mul(self, a, b):
        return a * b % self.q

    def neg(self, a):
        return -a % self.q

    def inv(self, a):
        if a % self.q == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(a, -1, self.q)

    def __int__(self):
        return self.q


def find_prime_in(lo, hi):
    """Smallest prime ``p`` with ``lo <= p <= hi``."""
    if lo > hi:
        raise InvalidParam(f"empty interval [{lo}, {hi}]")
    if hi.bit_length() > WIDTH_CAP:
        raise InvalidParam(f"upper end exceeds the {WIDTH_CAP}-bit width cap")
    p = max(lo, 2)
    while p <= hi:
        if is_prime(p):
            return FieldModulus(p)
        p += 1
    raise NoPrimeInRange(lo, hi)


def prime_at_least(x):
    """Smallest prime >= x (Bertrand guarantees one below 2x)."""
    x = max(int(x), 2)
    return find_prime_in(x, 2 * x)


# -- vectorised modular arithmetic -------------------------------------------

def _arith_mode(p):
    bits = int(p).bit_length()
    if bits <= 31:
        return "direct"
    if bits <= 56:
        return "chunk"
    return "object"


def _mulmod_chunk(a, b, p):
    # a, b in [0, p), p < 2**56: split b so every partial product fits in int64
    bits = int(p).bit_length()
    c = 62 - bits
    mask = (1 << c) - 1
    nchunks = ceil(bits / c)
    r = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    for j in range(nchunks - 1, -1, -1):
        piece = (b >> (j * c)) & mask
        r = ((r << c) % p + (a * piece) % p) % p
    return r


def mulmod(a, b, p):
    mode = _arith_mode(p)
    if mode == "chunk":
        return _mulmod_chunk(a, b, p)
    return (a * b) % p


def _as_field_array(values, p):
    if _arith_mode(p) == "object":
        return np.asarray(values, dtype=object)
    return np.asarray(values, dtype=np.int64)


def horner(coeffs, xs, p):
    """Evaluate ``sum(coeffs[i] * xs**i) mod p`` elementwise.

    ``coeffs`` is a sequence of length k whose items are ints or arrays that
    broadcast against ``xs`` (so one call can evaluate many polynomials).
    """
    xs = _as_field_array(xs, p)
    mode = _arith_mode(p)
    cs = [_as_field_array(c, p) for c in coeffs]
    acc = cs[-1] % p + np.zeros_like(xs)
    for c in reversed(cs[:-1]):
        if mode == "chunk":
            acc = (_mulmod_chunk(acc, xs, p) + c) % p
        else:
            acc = (acc * xs + c) % p
    return acc


# -- k-wise independent polynomial hashing ------------------------------------

def _draw_field_elements(rng, p, shape):
    if p < 2**63:
        return rng.integers(0, p, size=shape, dtype=np.int64)
    nbytes = (p.bit_length() + 7) // 8 + 8
    count = int(np.prod(shape)) if shape else 1
    out = np.empty(count, dtype=object)
    for i in range(count):
        out[i] = int.from_bytes(rng.bytes(nbytes), "little") % p
    return out.reshape(shape)


def _check_universe(xs, universe_size):
    xs = np.asarray(xs)
    if xs.size and (xs.min() < 0 or xs.max() >= universe_size):
        bad = xs[(xs < 0) | (xs >= universe_size)][0]
        raise OutOfUniverse(f"{int(bad)} not in [0, {universe_size})")


def _apply_overrides(out, xs, overrides):
    if overrides:
        xl = xs.tolist()
        for i, x in enumerate(xl):
            v = overrides.get(x)
            if v is not None:
                out[i] = v
    return out


@dataclass(frozen=True)
class KWiseHash:
    """Degree ``k - 1`` polynomial over ``F_field_prime`` reduced into ``[0, range)``.

    ``coefficients[i]`` multiplies ``x**i``. ``overrides`` maps inputs to
    forced outputs and exists for fault-injection tests.
    """

    k: int
    universe_size: int
    range: int
    field_prime: int
    coefficients: tuple
    overrides: MappingProxyType = dc_field(default=MappingProxyType({}), compare=False)

    def __post_init__(self):
        if len(self.coefficients) != self.k:
            raise InvalidParam("need exactly k coefficients")

    def __call__(self, x):
        return kwise_eval(self, x)

    def eval_many(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        _check_universe(xs, self.universe_size)
        vals = horner(self.coefficients, xs, self.field_prime) % self.range
        if self.range < 2**63 and vals.dtype == object:
            vals = vals.astype(np.int64)
        return _apply_overrides(vals, xs, self.overrides)

    def with_overrides(self, mapping):
        merged = dict(self.overrides)
        merged.update({int(k): int(v) for k, v in mapping.items()})
        return replace(self, overrides=MappingProxyType(merged))

    @property
    def description_bits(self):
        """Bits needed to write down the coefficients."""
        return self.k * self.field_prime.bit_length()


def kwise_new(k, universe_size, range, seed, field_prime=None):
    """Draw a k-wise independent hash ``[universe_size) -> [range)`` from ``seed``."""
    if k < 1:
        raise InvalidParam("k must be >= 1")
    if range < 1 or universe_size < 1:
        raise InvalidParam("range and universe_size must be positive")
    if field_prime is None:
        field_prime = prime_at_least(max(universe_size, range)).q
    rng = np.random.default_rng(seed)
    coeffs = _draw_field_elements(rng, field_prime, (k,))
    return KWiseHash(k, universe_size, range, field_prime, tuple(int(c) for c in coeffs))


def kwise_eval(h, x):
    x = int(x)
    if x in h.overrides:
        return h.overrides[x]
    if not 0 <= x < h.universe_size:
        raise OutOfUniverse(f"{x} not in [0, {h.universe_size})")
    acc = 0
    for c in reversed(h.coefficients):
        acc = (acc * x + c) % h.field_prime
    return acc % h.range


class HashBank:
    """``count`` independent k-wise hashes sharing one field, evaluated together.

    Row ``j`` is hash number ``j``; :meth:`eval_many` takes one row index per
    input, which is how per-bucket fingerprint functions are applied to a chunk
    of stream elements in one vectorised call.
    """

    def __init__(self, k, universe_size, range, count, seed, field_prime=None):
        if count < 1:
            raise InvalidParam("bank needs at least one hash")
        if field_prime is None:
            field_prime = prime_at_least(max(universe_size, range)).q
        self.k = k
        self.universe_size = universe_size
        self.range = range
        self.count = count
        self.field_prime = field_prime
        rng = np.random.default_rng(seed)
        self.coeffs = _draw_field_elements(rng, field_prime, (count, k))
        self.overrides = {}

    def hash(self, j):
        return KWiseHash(self.k, self.universe_size, self.range, self.field_prime,
                         tuple(int(c) for c in self.coeffs[j]),
                         MappingProxyType(self.overrides.get(j, {})))

    def set_override(self, j, x, value):
        self.overrides.setdefault(int(j), {})[int(x)] = int(value)

    def eval(self, j, x):
        return kwise_eval(self.hash(j), x)

    def eval_many(self, rows, xs):
        xs = np.asarray(xs, dtype=np.int64)
        rows = np.asarray(rows, dtype=np.int64)
        _check_universe(xs, self.universe_size)
        cs = [self.coeffs[rows, i] for i in range(self.k)]
        vals = horner(cs, xs, self.field_prime) % self.range
        if self.range < 2**63 and vals.dtype == object:
            vals = vals.astype(np.int64)
        if self.overrides:
            for i, (j, x) in enumerate(zip(rows.tolist(), xs.tolist())):
                forced = self.overrides.get(j)
                if forced and x in forced:
                    vals[i] = forced[x]
        return vals

    @property
    def description_bits(self):
        return self.count * self.k * self.field_prime.bit_length()


# -- keyed pseudorandom function ----------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class PRFHash:
    """Keyed counter-mode mixing hash into ``[0, modulus)``.

    Output word ``j`` for input ``x`` is ``mix(mix(x + key_j) ^ key2_j)`` with
    splitmix64's finaliser; enough words are concatenated to leave at most a
    ``2**-32`` relative modulo bias (power-of-two moduli up to 2**64 are exact).
    """

    def __init__(self, seed, modulus, overrides=None):
        if modulus < 1:
            raise InvalidParam("modulus must be positive")
        self.seed = int(seed) & (2**64 - 1)
        self.modulus = int(modulus)
        self.overrides = dict(overrides or {})
        bits = self.modulus.bit_length()
        pow2 = self.modulus & (self.modulus - 1) == 0
        if bits <= 32 or (pow2 and bits <= 65):
            self.nwords = 1
        else:
            self.nwords = ceil((bits + 32) / 64)
        with np.errstate(over="ignore"):
            j = np.arange(self.nwords, dtype=np.uint64)
            base = np.full(self.nwords, self.seed, dtype=np.uint64)
            self._k1 = _mix64(base + (j + np.uint64(1)) * _GOLDEN)
            self._k2 = _mix64(self._k1 ^ base)

    def _words(self, xs):
        with np.errstate(over="ignore"):
            xs = xs.astype(np.uint64)
            return [_mix64(_mix64(xs + self._k1[j]) ^ self._k2[j]) for j in range(self.nwords)]

    def eval_many(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        words = self._words(xs)
        if self.nwords == 1 and self.modulus <= 2**64:
            if self.modulus == 2**64:
                vals = words[0].astype(object)
            else:
                vals = words[0] % np.uint64(self.modulus)
                vals = vals.astype(np.int64) if self.modulus <= 2**63 else vals.astype(object)
        else:
            cols = [w.tolist() for w in words]
            ints = [sum(int(c) << (64 * j) for j, c in enumerate(parts)) % self.modulus
                    for parts in zip(*cols)]
            vals = np.empty(len(ints), dtype=object)
            vals[:] = ints
        return _apply_overrides(vals, xs, self.overrides)

    def __call__(self, x):
        x = int(x)
        if x in self.overrides:
            return self.overrides[x]
        return int(self.eval_many(np.array([x], dtype=np.int64))[0])

    @property
    def description_bits(self):
        return 64
