"""Divisor statistics, sums of two squares, sphere counts and r_{s,k}(N)."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lattice import BudgetExceeded, DEFAULT_MAX_ENTRIES, checked

MODES = ("positive", "signed-squares")


@dataclass(frozen=True)
class DivisorStats:
    N: int
    d: int
    d1: int
    d3: int


def divisors(N: int) -> list[int]:
    if N <= 0:
        raise ValueError("N must be positive")
    small, large = [], []
    for a in range(1, math.isqrt(N) + 1):
        if N % a == 0:
            small.append(a)
            if a * a != N:
                large.append(N // a)
    return small + large[::-1]


def divisor_stats(N: int) -> DivisorStats:
    ds = divisors(N)
    return DivisorStats(
        N, len(ds), sum(1 for x in ds if x % 4 == 1), sum(1 for x in ds if x % 4 == 3)
    )


def divisor_count_table(X: int) -> np.ndarray:
    """d(N) for 0 <= N <= X (entry 0 unused)."""
    d = np.zeros(X + 1, dtype=np.int64)
    for a in range(1, X + 1):
        d[a::a] += 1
    return d


def jacobi_r22(N: int) -> int:
    """Signed ordered representations of N as x^2 + y^2, via 4(d1 - d3)."""
    st = divisor_stats(N)
    return 4 * (st.d1 - st.d3)


def two_square_lattice_count(N: int) -> int:
    """|{(x, y) in Z^2 : x^2 + y^2 = N}| by scanning x."""
    if N < 0:
        return 0
    total = 0
    for x in range(-math.isqrt(N), math.isqrt(N) + 1):
        rest = N - x * x
        r = math.isqrt(rest)
        if r * r == rest:
            total += 1 if r == 0 else 2
    return total


@lru_cache(maxsize=65536)
def sphere_count_parity(k: int, N: int, c: tuple[int, ...]) -> int:
    """|{x in Z^k : |x|^2 = N, x = c (mod 2)}|."""
    c = tuple(int(ci) % 2 for ci in c)
    if len(c) != k:
        raise ValueError("parity class length must equal k")
    if N < 0:
        return 0
    if N == 0:
        return 1 if not any(c) else 0
    if k == 1:
        r = math.isqrt(N)
        if r * r != N or r % 2 != c[0]:
            return 0
        return 2
    total = 0
    r = math.isqrt(N)
    for x in range(-r, r + 1):
        if x % 2 == c[0]:
            total += sphere_count_parity(k - 1, N - x * x, c[1:])
    return total


def sphere_count_table(k: int, X: int, c: tuple[int, ...] | None = None) -> np.ndarray:
    """Sphere counts for all 0 <= N <= X, optionally restricted to a parity class."""
    r = math.isqrt(X)
    out = None
    for i in range(k):
        base = np.zeros(X + 1, dtype=np.int64)
        for x in range(-r, r + 1):
            if c is None or x % 2 == c[i] % 2:
                base[x * x] += 1
        out = base if out is None else np.convolve(out, base)[: X + 1]
    return out


def _values(k: int, bound: int, mode: str) -> Counter:
    """Multiplicity of each admissible single term m^k <= bound."""
    vals: Counter = Counter()
    if mode == "positive":
        m = 1
        while m**k <= bound:
            vals[m**k] += 1
            m += 1
    else:
        vals[0] = 1
        m = 1
        while m * m <= bound:
            vals[m * m] += 2
            m += 1
    return vals


@lru_cache(maxsize=256)
def _partial_sums(h: int, k: int, bound: int, mode: str) -> dict[int, int]:
    """Ordered h-tuples tabulated by their sum, truncated at bound."""
    table: Counter = Counter({0: 1})
    single = _values(k, bound, mode)
    for _ in range(h):
        nxt: Counter = Counter()
        for a, ca in table.items():
            for v, cv in single.items():
                if a + v <= bound:
                    nxt[a + v] += ca * cv
        table = nxt
    return dict(table)


def _check_mode(k: int, mode: str):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "signed-squares" and k != 2:
        raise ValueError("signed-squares mode requires k = 2")


def rep_count(s: int, k: int, N: int, mode: str = "positive") -> int:
    """Ordered representations of N as a sum of s k-th powers (meet in the middle).

    ``positive`` counts tuples of positive integers; ``signed-squares`` counts
    all integer tuples with sum of squares N.
    """
    if s < 1 or k < 1 or N < 1:
        raise ValueError("need s >= 1, k >= 1, N >= 1")
    _check_mode(k, mode)
    bound = 1 << max(N - 1, 1).bit_length()
    h = (s + 1) // 2
    left = _partial_sums(h, k, bound, mode)
    right = _partial_sums(s - h, k, bound, mode)
    return checked(sum(c * right.get(N - a, 0) for a, c in left.items() if a <= N))


def rep_count_naive(s: int, k: int, N: int, mode: str = "positive") -> int:
    """Nested enumeration of s-tuples; exponential, for oracles only."""
    _check_mode(k, mode)
    if mode == "positive":
        top = 1
        while (top + 1) ** k <= N:
            top += 1
        rng = range(1, top + 1)
    else:
        r = math.isqrt(N)
        rng = range(-r, r + 1)
    return sum(1 for tup in itertools.product(rng, repeat=s) if sum(m**k for m in tup) == N)


def rep_count_table(s: int, k: int, X: int, mode: str = "positive",
                    max_entries: int = DEFAULT_MAX_ENTRIES) -> np.ndarray:
    """r(N) for all 0 <= N <= X by a forward sieve over the summands."""
    _check_mode(k, mode)
    if X + 1 > max_entries:
        raise BudgetExceeded(f"sieve length {X + 1} exceeds budget {max_entries}")
    single = _values(k, X, mode)
    r = np.zeros(X + 1, dtype=np.int64)
    r[0] = 1
    for _ in range(s):
        nxt = np.zeros_like(r)
        for v, cv in single.items():
            nxt[v:] += cv * r[: X + 1 - v]
        r = nxt
    if r.size and (r < 0).any():
        raise OverflowError("representation counter overflowed")
    return r


@dataclass
class RecordScan:
    s: int
    k: int
    X: int
    records: list[tuple[int, int]] = field(default_factory=list)


def records_of(values: np.ndarray) -> list[tuple[int, int]]:
    """Strictly increasing record subsequence (N, r(N)) for N >= 1."""
    out = []
    best = 0
    for N in range(1, values.size):
        v = int(values[N])
        if v > best:
            out.append((N, v))
            best = v
    return out


def record_scan(s: int, k: int, X: int, max_entries: int = DEFAULT_MAX_ENTRIES) -> RecordScan:
    table = rep_count_table(s, k, X, "positive", max_entries)
    scan = RecordScan(s, k, X, records_of(table))
    for (n0, r0), (n1, r1) in zip(scan.records, scan.records[1:]):
        assert n1 > n0 and r1 > r0
    return scan
