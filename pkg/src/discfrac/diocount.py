"""Solution counts |D^{tau,j}_s(n, t)| and the (s, eps) growth profiler.

A solution is an s-tuple of shell points x_i with x_1 + ... + x_s = n and
gamma(x_1) + ... + gamma(x_s) = t.  Counts are exact; tables aggregate all
s-tuples by their target (n, t).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .lattice import (
    DEFAULT_MAX_ENTRIES,
    BudgetExceeded,
    DyadicShell,
    NormMap,
    PointIndex,
    SurfaceMap,
    checked,
    shell_array,
    shell_cardinality,
)
from .repcount import divisors

POLICIES = ("all-feasible", "nondegenerate-only", "degenerate-only")


@dataclass(frozen=True)
class Target:
    n: tuple[int, ...]
    t: int

    def __post_init__(self):
        n = (self.n,) if isinstance(self.n, (int, np.integer)) else self.n
        object.__setattr__(self, "n", tuple(int(c) for c in n))
        object.__setattr__(self, "t", int(self.t))

    def as_row(self) -> tuple[int, ...]:
        return self.n + (self.t,)


class PointSet:
    """A finite set of lattice points with their gamma values and a membership index."""

    def __init__(self, points: np.ndarray, gamma: SurfaceMap):
        self.points = np.asarray(points, dtype=np.int64).reshape(-1, gamma.dim)
        self.gamma = gamma
        self.gvals = gamma.values(self.points)
        self.index = PointIndex(self.points)
        self._symmetries: list[np.ndarray] | None = None
        self._halves: dict = {}

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def rows(self) -> np.ndarray:
        """(M, k+1) array of (m, gamma(m))."""
        return np.column_stack([self.points, self.gvals])

    def coordinate_bound(self) -> int:
        return int(np.abs(self.points).max()) if len(self) else 0

    def gamma_bound(self) -> int:
        return int(np.abs(self.gvals).max()) if len(self) else 0


@lru_cache(maxsize=32)
def shell_surface(gamma: SurfaceMap, tau: NormMap, j: int) -> PointSet:
    if gamma.dim != tau.dim:
        raise ValueError("gamma and tau act on different dimensions")
    return PointSet(shell_array(DyadicShell(j, tau)), gamma)


def box_surface(gamma: SurfaceMap, R: int) -> PointSet:
    axes = [np.arange(-R, R + 1, dtype=np.int64)] * gamma.dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, gamma.dim)
    return PointSet(grid, gamma)


class KeyPacker:
    """Linear signed mixed-radix packing of (n, t) rows into int64.

    pack(a) + pack(b) == pack(a + b) as long as every digit of the sum stays
    within its half-width, which the constructor guarantees for s-fold sums.
    """

    def __init__(self, half_widths: Sequence[int]):
        self.half = [int(h) for h in half_widths]
        self.base = [2 * h + 1 for h in self.half]
        strides = []
        acc = 1
        for b in reversed(self.base):
            strides.append(acc)
            acc *= b
        if acc >= 2**62:
            raise OverflowError("packed key range does not fit in int64")
        self.strides = np.array(strides[::-1], dtype=np.int64)

    @classmethod
    def for_sums(cls, ps: PointSet, s: int) -> "KeyPacker":
        rows = ps.rows
        if rows.shape[0] == 0:
            return cls([0] * rows.shape[1])
        half = s * np.abs(rows).max(axis=0)
        return cls([int(h) for h in half])

    def pack(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=np.int64) @ self.strides

    def unpack(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64).copy()
        out = np.zeros((keys.size, len(self.base)), dtype=np.int64)
        for i in range(len(self.base) - 1, -1, -1):
            b, h = self.base[i], self.half[i]
            d = np.mod(keys + h, b) - h
            out[:, i] = d
            keys = (keys - d) // b
        return out


def _fold(keys: np.ndarray, weights: np.ndarray | None = None):
    uk, inv = np.unique(keys, return_inverse=True)
    counts = np.bincount(inv, weights=weights, minlength=uk.size)
    if weights is not None:
        counts = np.rint(counts).astype(np.int64)
    return uk, counts.astype(np.int64)


class _Accumulator:
    """Sparse (key -> count) accumulator with periodic compaction."""

    def __init__(self, limit: int = 20_000_000):
        self.limit = limit
        self.keys: list[np.ndarray] = []
        self.counts: list[np.ndarray] = []
        self.size = 0

    def add(self, keys: np.ndarray, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.ones(keys.size, dtype=np.int64)
        self.keys.append(keys)
        self.counts.append(counts)
        self.size += keys.size
        if self.size > self.limit:
            self._compact()

    def _compact(self):
        if not self.keys:
            return
        k = np.concatenate(self.keys)
        c = np.concatenate(self.counts)
        uk, inv = np.unique(k, return_inverse=True)
        uc = np.bincount(inv, weights=c, minlength=uk.size)
        self.keys = [uk]
        self.counts = [np.rint(uc).astype(np.int64)]
        self.size = uk.size
        # keep compaction amortised when the distinct count is itself large
        self.limit = max(self.limit, 2 * self.size)

    def result(self):
        self._compact()
        if not self.keys:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return self.keys[0], self.counts[0]


def _join(ka, ca, kb, cb, chunk_cells: int = 4_000_000):
    """All sums a + b of two sparse tables, weighted by ca * cb."""
    acc = _Accumulator()
    step = max(1, chunk_cells // max(ka.size, 1))
    for i in range(0, kb.size, step):
        sub_k = kb[i : i + step]
        sub_c = cb[i : i + step]
        keys = (ka[None, :] + sub_k[:, None]).ravel()
        weights = (ca[None, :] * sub_c[:, None]).ravel()
        uk, inv = np.unique(keys, return_inverse=True)
        acc.add(uk, np.bincount(inv, weights=weights, minlength=uk.size).astype(np.int64))
    return acc.result()


def _fold_table(ps: PointSet, h: int, packer: KeyPacker):
    """Aggregated table of h-fold sums: distinct packed keys with tuple counts."""
    base_k, base_c = _fold(packer.pack(ps.rows))
    if h == 0:
        return np.zeros(1, dtype=np.int64), np.ones(1, dtype=np.int64)
    ka, ca = base_k, base_c
    for _ in range(h - 1):
        ka, ca = _join(ka, ca, base_k, base_c)
    return ka, ca


@dataclass
class CountTable:
    """Exact |D_s(n, t)| for every feasible target (n, t)."""

    s: int
    packer: KeyPacker
    keys: np.ndarray
    counts: np.ndarray
    method: str = "join"

    def __len__(self) -> int:
        return self.keys.size

    def __getitem__(self, target: Target | Sequence[int]) -> int:
        row = target.as_row() if isinstance(target, Target) else tuple(target)
        try:
            key = int(self.packer.pack(np.array([row]))[0])
        except OverflowError:
            return 0
        for i, h in enumerate(self.packer.half):
            if abs(row[i]) > h:
                return 0
        pos = int(np.searchsorted(self.keys, key))
        if pos < self.keys.size and self.keys[pos] == key:
            return int(self.counts[pos])
        return 0

    def targets(self) -> np.ndarray:
        return self.packer.unpack(self.keys)

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(c) for c in r): int(v) for r, v in zip(self.targets(), self.counts)}

    def total(self) -> int:
        return int(self.counts.sum())

    def max_entry(self) -> tuple[int, Target | None]:
        if not self.keys.size:
            return 0, None
        i = int(np.argmax(self.counts))
        row = self.packer.unpack(self.keys[i : i + 1])[0]
        return int(self.counts[i]), Target(tuple(row[:-1]), row[-1])


def _dense_shape(ps: PointSet, s: int):
    rows = ps.rows
    lo = rows.min(axis=0)
    hi = rows.max(axis=0)
    width = hi - lo + 1
    conv = s * (width - 1) + 1
    return lo, width, conv


def _fft_power(ps: PointSet, s: int, max_entries: int, workers: int = 1):
    """Dense s-fold autoconvolution of the surface indicator, exactly rounded."""
    import scipy.fft

    lo, width, conv = _dense_shape(ps, s)
    shape = [scipy.fft.next_fast_len(int(c), real=True) for c in conv]
    cells = int(np.prod(np.array(shape, dtype=object)))
    if cells > 2 * max_entries:
        raise BudgetExceeded(f"dense convolution needs {cells} cells, budget {2 * max_entries}")
    arr = np.zeros(tuple(int(w) for w in width), dtype=np.float64)
    arr[tuple((ps.rows - lo).T)] = 1.0
    axes = tuple(range(arr.ndim))
    spec = scipy.fft.rfftn(arr, s=shape, axes=axes, workers=workers)
    del arr
    spec **= s
    out = scipy.fft.irfftn(spec, s=shape, axes=axes, workers=workers, overwrite_x=True)
    del spec
    out = out[tuple(slice(0, int(c)) for c in conv)]
    # round slab by slab so the check never doubles the memory
    err = 0.0
    for i in range(out.shape[0]):
        slab = out[i]
        r = np.rint(slab)
        if slab.size:
            err = max(err, float(np.abs(slab - r).max()))
        slab[...] = r
    if err > 0.25:
        raise ArithmeticError(f"FFT rounding error {err} too large for exact counts")
    return out, s * lo


def _fft_table(ps: PointSet, s: int, max_entries: int, workers: int = 1) -> CountTable:
    dense, origin = _fft_power(ps, s, max_entries, workers)
    idx = np.nonzero(dense > 0.5)
    rows = np.column_stack(idx).astype(np.int64) + origin
    counts = dense[idx].astype(np.int64)
    packer = KeyPacker.for_sums(ps, s)
    keys = packer.pack(rows)
    order = np.argsort(keys)
    return CountTable(s, packer, keys[order], counts[order], method="fft")


def surface_count_table(ps: PointSet, s: int, method: str = "auto",
                        max_entries: int = DEFAULT_MAX_ENTRIES, workers: int = 1) -> CountTable:
    """Meet in the middle: join the ceil(s/2)-fold and floor(s/2)-fold sum tables."""
    if s < 1:
        raise ValueError("s must be >= 1")
    packer = KeyPacker.for_sums(ps, s)
    if method == "auto":
        _, _, conv = _dense_shape(ps, s) if len(ps) else (None, None, np.array([1]))
        cells = int(np.prod(conv.astype(object)))
        combos = len(ps) ** s
        method = "fft" if s >= 3 and combos > 50 * cells and cells <= 2 * max_entries else "join"
    if method == "fft":
        return _fft_table(ps, s, max_entries, workers)
    if method != "join":
        raise ValueError(f"unknown method {method!r}")
    h = (s + 1) // 2
    # upper bounds on the half-table sizes, so oversized tables are never built
    est = [min(len(ps) ** e, int(np.prod(_dense_shape(ps, e)[2].astype(object))) if len(ps) else 1)
           for e in (h, s - h)]
    if est[0] * est[1] > 40 * max_entries:
        raise BudgetExceeded(f"half-tables of up to {est[0]} x {est[1]} entries exceed budget")
    ka, ca = _fold_table(ps, h, packer)
    kb, cb = _fold_table(ps, s - h, packer)
    if ka.size * kb.size > 40 * max_entries:
        raise BudgetExceeded(f"join of {ka.size} x {kb.size} half-tables exceeds budget")
    keys, counts = _join(ka, ca, kb, cb)
    return CountTable(s, packer, keys, counts, method="join")


def count_table(gamma: SurfaceMap, tau: NormMap, s: int, j: int, method: str = "auto",
                max_entries: int = DEFAULT_MAX_ENTRIES, workers: int = 1) -> CountTable:
    return surface_count_table(shell_surface(gamma, tau, j), s, method, max_entries, workers)


def count_table_naive(gamma: SurfaceMap, tau: NormMap, s: int, j: int,
                      max_entries: int = DEFAULT_MAX_ENTRIES) -> CountTable:
    """Enumerate every s-tuple individually and histogram its (n, t)."""
    ps = shell_surface(gamma, tau, j)
    M = len(ps)
    if M**s > 50 * max_entries:
        raise BudgetExceeded(f"{M}^{s} tuples exceed the naive enumeration budget")
    packer = KeyPacker.for_sums(ps, s)
    rows = ps.rows
    # every (s-1)-tuple kept separately, no aggregation of partial sums
    prefix = np.zeros((1, rows.shape[1]), dtype=np.int64)
    for _ in range(s - 1):
        prefix = (prefix[:, None, :] + rows[None, :, :]).reshape(-1, rows.shape[1])
    acc = _Accumulator()
    step = max(1, 4_000_000 // max(M, 1))
    for i in range(0, prefix.shape[0], step):
        full = prefix[i : i + step, None, :] + rows[None, :, :]
        acc.add(packer.pack(full.reshape(-1, rows.shape[1])))
    k, c = acc.result()
    return CountTable(s, packer, k, c, method="naive")


def dio_count_shell(gamma: SurfaceMap, tau: NormMap, s: int, j: int, target: Target) -> int:
    """|D^{tau,j}_s(n, t)| by probing the ceil(s/2)-fold table with the complementary half."""
    if s < 2:
        raise ValueError("s must be >= 2")
    if len(target.n) != gamma.dim:
        raise ValueError("target dimension does not match gamma")
    ps = shell_surface(gamma, tau, j)
    return _probe_count(ps, s, target)


def _probe_count(ps: PointSet, s: int, target: Target) -> int:
    if not len(ps):
        return 0
    packer = KeyPacker.for_sums(ps, s)
    row = np.array(target.as_row(), dtype=np.int64)
    if np.any(np.abs(row) > np.array(packer.half)):
        return 0
    h = (s + 1) // 2
    ka, ca = _half_table(ps, h, s)
    kb, cb = _half_table(ps, s - h, s)
    want = int(packer.pack(row[None, :])[0]) - kb
    pos = np.searchsorted(ka, want)
    pos = np.minimum(pos, ka.size - 1)
    hit = ka[pos] == want
    return checked(int((ca[pos[hit]] * cb[hit]).sum()))


def _half_table(ps: PointSet, h: int, s: int):
    """The h-fold sum table packed for s-fold targets, cached on the point set."""
    if (h, s) not in ps._halves:
        ps._halves[(h, s)] = _fold_table(ps, h, KeyPacker.for_sums(ps, s))
    return ps._halves[(h, s)]


def dio_count_naive(gamma: SurfaceMap, tau: NormMap, s: int, j: int, target: Target) -> int:
    """Plain s-fold product loop; tiny shells only."""
    ps = shell_surface(gamma, tau, j)
    pts = [tuple(int(c) for c in p) for p in ps.points]
    gv = [int(g) for g in ps.gvals]
    k = gamma.dim
    count = 0
    for idx in itertools.product(range(len(pts)), repeat=s):
        if sum(gv[i] for i in idx) != target.t:
            continue
        if all(sum(pts[i][c] for i in idx) == target.n[c] for c in range(k)):
            count += 1
    return count


class _Unbounded:
    """Marker for an infinite solution count (the degenerate hyperbolic lines)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "UNBOUNDED"

    def __int__(self):
        raise ValueError("the solution set is infinite; no integer count exists")

    __index__ = __int__

    def __float__(self):
        raise ValueError("the solution set is infinite; no integer count exists")


UNBOUNDED = _Unbounded()


def reduction_invariant(gamma: SurfaceMap, n: Sequence[int], t: int) -> int:
    """N = 2t - gamma(n); the pair equations reduce to gamma(X) = N with X = 2x - n."""
    if not gamma.quadratic:
        raise ValueError("the pair reduction needs a quadratic gamma")
    n = tuple(int(c) for c in n)
    if gamma.kind == "euclidean-square":
        return 2 * t - sum(c * c for c in n)
    return 2 * t - (n[0] * n[0] - n[1] * n[1])


def sphere_points(k: int, N: int):
    """Yield every X in Z^k with |X|^2 = N."""
    if N < 0:
        return
    if k == 1:
        r = math.isqrt(N)
        if r * r == N:
            yield (r,)
            if r:
                yield (-r,)
        return
    r = math.isqrt(N)
    for a in range(-r, r + 1):
        for rest in sphere_points(k - 1, N - a * a):
            yield (a,) + rest


def _in_shell(shell: DyadicShell | None, m) -> bool:
    return shell is None or shell.contains(m)


def _unpair(n, X):
    """x = (n + X)/2 and y = (n - X)/2, or None if the parity fails."""
    if any((a - b) % 2 for a, b in zip(n, X)):
        return None
    x = tuple((a + b) // 2 for a, b in zip(n, X))
    y = tuple((a - b) // 2 for a, b in zip(n, X))
    return x, y


def _batch_dispatch(gamma: SurfaceMap, n, t, shell, reduction):
    if shell is None:
        raise ValueError("array targets need a shell")
    red = reduction or PairReduction(gamma, shell.norm, shell.level)
    rows = np.column_stack([np.asarray(n, dtype=np.int64).reshape(-1, gamma.dim),
                            np.asarray(t, dtype=np.int64).reshape(-1)])
    return red.counts(rows)


def pair_count_paraboloid(n, t, shell: DyadicShell | None = None, *, _reduction=None):
    """Solutions of x + y = n, |x|^2 + |y|^2 = t via the sphere |X|^2 = 2t - |n|^2.

    An (M, k) array n with an (M,) array t is answered in one vectorised pass.
    """
    if np.ndim(t) > 0:
        k = np.shape(n)[-1]
        return _batch_dispatch(SurfaceMap("euclidean-square", k), n, t, shell, _reduction)
    n = tuple(int(c) for c in n)
    k = len(n)
    if shell is not None and shell.norm.dim != k:
        raise ValueError("target dimension does not match the shell")
    N = 2 * t - sum(c * c for c in n)
    if N < 0:
        return 0
    if shell is None:
        from .repcount import sphere_count_parity

        return sphere_count_parity(k, N, tuple(c % 2 for c in n))
    count = 0
    for X in sphere_points(k, N):
        xy = _unpair(n, X)
        if xy and shell.contains(xy[0]) and shell.contains(xy[1]):
            count += 1
    return count


def hyperbola_points(N: int, parity: tuple[int, int] | None = None):
    """Yield X in Z^2 with X1^2 - X2^2 = N != 0 from factorisations N = u*v, u = v (mod 2)."""
    if N == 0:
        raise ValueError("N = 0 is the degenerate pair of lines")
    for d in divisors(abs(N)):
        for u in (d, -d):
            v = N // u
            if (u - v) % 2:
                continue
            X = ((u + v) // 2, (u - v) // 2)
            if parity is None or (X[0] % 2, X[1] % 2) == parity:
                yield X


def pair_count_hyperbolic(n, t, shell: DyadicShell | None = None, *, _reduction=None):
    """Solutions of x + y = n, gamma(x) + gamma(y) = t for gamma = m1^2 - m2^2.

    Returns UNBOUNDED when N = 2t - (n1^2 - n2^2) vanishes and no shell is given.
    Array targets are answered in one vectorised pass.
    """
    if np.ndim(t) > 0:
        return _batch_dispatch(SurfaceMap("hyperbolic-quadratic", 2), n, t, shell, _reduction)
    n = tuple(int(c) for c in n)
    if len(n) != 2 or (shell is not None and shell.norm.dim != 2):
        raise ValueError("the hyperbolic reduction lives in dimension 2")
    N = 2 * t - (n[0] * n[0] - n[1] * n[1])
    parity = (n[0] % 2, n[1] % 2)
    if N != 0:
        count = 0
        for X in hyperbola_points(N, parity):
            xy = _unpair(n, X)
            if xy and _in_shell(shell, xy[0]) and _in_shell(shell, xy[1]):
                count += 1
        return count
    if shell is None:
        return UNBOUNDED
    # X lies on X1 = +-X2; x = (n + X)/2 in the shell bounds |X_i|
    bound = 2 * shell.coordinate_bound() + max(abs(c) for c in n)
    count = 0
    for a in range(-bound, bound + 1):
        for X in {(a, a), (a, -a)}:
            xy = _unpair(n, X)
            if xy and shell.contains(xy[0]) and shell.contains(xy[1]):
                count += 1
    return count


def lemp_check(x1: int, x2: int) -> bool:
    """x1^2 + x2^2 <= (x1^2 - x2^2)^2, the squared form of |x|^{1/2}-type comparison."""
    if abs(x1) == abs(x2):
        raise ValueError("needs |x1| != |x2|")
    return x1 * x1 + x2 * x2 <= (x1 * x1 - x2 * x2) ** 2


def box_solution_count(gamma: SurfaceMap, s: int, target: Target, R: int) -> int:
    """s-tuples with every |x_i|_inf <= R solving both equations."""
    if R < 0:
        raise ValueError("R must be >= 0")
    if len(target.n) != gamma.dim:
        raise ValueError("target dimension does not match gamma")
    return _probe_count(box_surface(gamma, R), s, target)


# ---------------------------------------------------------------------------
# vectorised pair reduction


class _DifferenceGroups:
    """All X in the difference box of a point set, grouped by (gamma(X), X mod 2)."""

    def __init__(self, ps: PointSet, max_entries: int):
        k = ps.gamma.dim
        B = 2 * ps.coordinate_bound()
        cells = (2 * B + 1) ** k
        if cells * (k + 2) > max_entries:
            raise BudgetExceeded(f"difference box with {cells} points exceeds budget")
        axes = [np.arange(-B, B + 1, dtype=np.int64)] * k
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        g = ps.gamma.values(X)
        cls = _parity_code(X)
        key = g * (1 << k) + cls
        order = np.argsort(key, kind="stable")
        self.X = X[order]
        self.key = key[order]
        self.groups, self.start, self.size = np.unique(self.key, return_index=True, return_counts=True)
        self.k = k

    def group_key(self, N: np.ndarray, cls: np.ndarray) -> np.ndarray:
        return N * (1 << self.k) + cls

    def lookup(self, gkeys: np.ndarray):
        pos = np.searchsorted(self.groups, gkeys)
        pos = np.minimum(pos, self.groups.size - 1)
        found = self.groups[pos] == gkeys
        start = np.where(found, self.start[pos], 0)
        size = np.where(found, self.size[pos], 0)
        return start, size


def _parity_code(X: np.ndarray) -> np.ndarray:
    code = np.zeros(X.shape[0], dtype=np.int64)
    for i in range(X.shape[1]):
        code = code * 2 + (X[:, i] & 1)
    return code


def _group_histogram(ps: PointSet, Xs: np.ndarray, pack_n, chunk: int = 4_000_000,
                     labels: np.ndarray | None = None, span: int = 0, offset: int = 0):
    """For X in Xs: histogram of n = 2x - X over x with x and x - X both in ps.

    With labels, keys are label * span + (packed n + offset), so several groups
    share one pass and stay separable.
    """
    acc = _Accumulator()
    M = len(ps)
    step = max(1, chunk // max(M, 1))
    for i in range(0, Xs.shape[0], step):
        blk = Xs[i : i + step]
        y = (ps.points[None, :, :] - blk[:, None, :]).reshape(-1, ps.points.shape[1])
        ok = ps.index.contains(y)
        if not ok.any():
            continue
        pi, xi = np.divmod(np.nonzero(ok)[0], M)
        n = 2 * ps.points[xi] - blk[pi]
        keys = pack_n(n)
        if labels is not None:
            keys = labels[i + pi] * span + (keys + offset)
        acc.add(keys)
    return acc.result()


def _n_packer(ps: PointSet):
    half = 2 * ps.coordinate_bound()
    packer = KeyPacker([half] * ps.gamma.dim)
    return packer


class PairReduction:
    """Vectorised pair reduction on one shell.

    Counts X with gamma(X) = N, X = n (mod 2) and (n +- X)/2 in the shell.  The
    difference groups and the degenerate-line histogram are built once.
    """

    def __init__(self, gamma: SurfaceMap, tau: NormMap, j: int,
                 max_entries: int = DEFAULT_MAX_ENTRIES):
        if not gamma.quadratic:
            raise ValueError("the pair reduction needs a quadratic gamma")
        self.gamma = gamma
        self.ps = shell_surface(gamma, tau, j)
        self.groups = _DifferenceGroups(self.ps, max_entries)
        self.packer = _n_packer(self.ps)
        self._lines = None

    def _line_histogram(self):
        if self._lines is None:
            zero = (self.groups.key >> self.groups.k) == 0
            self._lines = _group_histogram(self.ps, self.groups.X[zero], self.packer.pack)
        return self._lines

    def counts(self, targets: np.ndarray) -> np.ndarray:
        gamma, ps, groups = self.gamma, self.ps, self.groups
        targets = np.asarray(targets, dtype=np.int64).reshape(-1, gamma.dim + 1)
        n, t = targets[:, :-1], targets[:, -1]
        out = np.zeros(targets.shape[0], dtype=np.int64)
        inside = np.all(np.abs(n) <= self.packer.half[0], axis=1)
        N = 2 * t - gamma.values(np.where(inside[:, None], n, 0))
        cls = _parity_code(n)
        degenerate = inside & (N == 0) & (gamma.kind == "hyperbolic-quadratic")
        regular = inside & ~degenerate

        idx = np.nonzero(regular)[0]
        start, size = groups.lookup(groups.group_key(N[idx], cls[idx]))
        csum = np.cumsum(size)
        lo = 0
        while lo < idx.size:
            # expand candidate X per target in chunks of bounded total size
            base = csum[lo - 1] if lo else 0
            hi = max(int(np.searchsorted(csum, base + 2_000_000, side="right")), lo + 1)
            sz = size[lo:hi]
            tot = int(sz.sum())
            if tot:
                owner = np.repeat(np.arange(lo, hi), sz)
                offs = np.arange(tot) - np.repeat(np.cumsum(sz) - sz, sz)
                X = groups.X[np.repeat(start[lo:hi], sz) + offs]
                nn = n[idx[owner]]
                # group membership fixes X = n (mod 2), so the halves are exact
                ok = ps.index.contains((nn + X) >> 1)
                ok[ok] = ps.index.contains((nn[ok] - X[ok]) >> 1)
                out[idx[lo:hi]] += np.bincount(owner[ok] - lo, minlength=hi - lo)
            lo = hi

        didx = np.nonzero(degenerate)[0]
        if didx.size:
            # N = 0 on the hyperbola: X on the two diagonal lines
            hk, hc = self._line_histogram()
            if hk.size:
                want = self.packer.pack(n[didx])
                pos = np.minimum(np.searchsorted(hk, want), hk.size - 1)
                hit = hk[pos] == want
                out[didx[hit]] = hc[pos[hit]]
        return out


def pair_counts_batch(gamma: SurfaceMap, tau: NormMap, j: int, targets: np.ndarray,
                      max_entries: int = DEFAULT_MAX_ENTRIES) -> np.ndarray:
    return PairReduction(gamma, tau, j, max_entries).counts(targets)


def pair_table_bands(ps: PointSet, band_width: int):
    """Exact s = 2 table split into bands of n_1, as (targets, counts) per band.

    Pairs are generated band by band from the shell sorted on its first
    coordinate, so memory stays proportional to one band.
    """
    order = np.lexsort(ps.points.T[::-1])
    pts = ps.points[order]
    rows = ps.rows[order]
    first = pts[:, 0]
    vals, starts = np.unique(first, return_index=True)
    ends = np.append(starts[1:], first.size)
    packer = KeyPacker.for_sums(ps, 2)
    lo_n, hi_n = 2 * int(first.min()), 2 * int(first.max())
    for a in range(lo_n, hi_n + 1, band_width):
        b = a + band_width
        acc = _Accumulator()
        for v, s0, s1 in zip(vals, starts, ends):
            ys = int(np.searchsorted(first, a - v, side="left"))
            ye = int(np.searchsorted(first, b - v, side="left"))
            if ye <= ys:
                continue
            keys = packer.pack(rows[s0:s1])[:, None] + packer.pack(rows[ys:ye])[None, :]
            acc.add(keys.ravel())
        k, c = acc.result()
        if k.size:
            yield packer.unpack(k), c


@dataclass
class ReductionCheck:
    gamma_kind: str
    tau_kind: str
    j: int
    targets: int = 0
    pairs: int = 0
    mismatches: int = 0
    degenerate_targets: int = 0
    examples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.mismatches == 0 and self.targets > 0


def verify_pair_reduction(gamma: SurfaceMap, tau: NormMap, j: int, band_width: int = 64,
                          max_entries: int = DEFAULT_MAX_ENTRIES) -> ReductionCheck:
    """Compare the reduction against the exact pair table on every feasible target."""
    ps = shell_surface(gamma, tau, j)
    red = PairReduction(gamma, tau, j, max_entries)
    counter = pair_count_paraboloid if gamma.kind == "euclidean-square" else pair_count_hyperbolic
    shell = DyadicShell(j, tau)
    rep = ReductionCheck(gamma.kind, tau.kind, j)
    for T, c in pair_table_bands(ps, band_width):
        got = counter(T[:, :-1], T[:, -1], shell, _reduction=red)
        bad = np.nonzero(got != c)[0]
        rep.targets += T.shape[0]
        rep.pairs += int(c.sum())
        rep.mismatches += int(bad.size)
        rep.degenerate_targets += int((2 * T[:, -1] - gamma.values(T[:, :-1]) == 0).sum())
        for i in bad[: max(0, 5 - len(rep.examples))]:
            rep.examples.append((tuple(int(v) for v in T[i]), int(c[i]), int(got[i])))
    assert rep.pairs == len(ps) ** 2
    return rep


# ---------------------------------------------------------------------------
# growth profile


@dataclass
class ProfileRow:
    j: int
    M: int
    exact: bool
    target: Target | None
    method: str


@dataclass
class GrowthProfile:
    s: int
    gamma_kind: str
    tau_kind: str
    policy: str
    rows: list[ProfileRow] = field(default_factory=list)
    window: tuple[int, int] | None = None

    def fit_rows(self) -> list[ProfileRow]:
        lo, hi = self.window if self.window else (0, max((r.j for r in self.rows), default=0))
        return [r for r in self.rows if lo <= r.j <= hi and r.M >= 1]

    @property
    def slope(self) -> float | None:
        """Least-squares slope of log2 M_j against j; None with fewer than 3 usable rows."""
        rows = self.fit_rows()
        if len(rows) < 3:
            return None
        js = np.array([r.j for r in rows], dtype=float)
        ys = np.log2(np.array([r.M for r in rows], dtype=float))
        return float(np.polyfit(js, ys, 1)[0])

    @property
    def slope_is_lower_bound(self) -> bool:
        """True when every inexact row is a lower bound with a positive regression weight."""
        rows = self.fit_rows()
        if not rows:
            return False
        mean = sum(r.j for r in rows) / len(rows)
        return all(r.exact or r.j > mean for r in rows)

    @property
    def all_exact(self) -> bool:
        return all(r.exact for r in self.rows)

    def summary(self) -> dict:
        return {
            "s": self.s,
            "gamma": self.gamma_kind,
            "tau": self.tau_kind,
            "policy": self.policy,
            "window": list(self.window) if self.window else None,
            "slope": self.slope,
            "all_exact": self.all_exact,
            "slope_is_lower_bound": self.slope_is_lower_bound,
        }


def _check_feasible(table: CountTable, ps: PointSet):
    """Every reached target obeys |n_i| <= s max|x| and |t| <= s max|gamma|."""
    if not len(table):
        return
    T = table.targets()
    assert np.all(np.abs(T[:, :-1]) <= table.s * ps.coordinate_bound())
    assert np.all(np.abs(T[:, -1]) <= table.s * ps.gamma_bound())


def _target_from_n(gamma: SurfaceMap, n: np.ndarray, N: int) -> Target:
    gn = int(gamma.values(n[None, :])[0])
    return Target(tuple(int(c) for c in n), (N + gn) // 2)


def pair_maximum(ps: PointSet, policy: str = "all-feasible",
                 max_entries: int = DEFAULT_MAX_ENTRIES) -> tuple[int, Target | None]:
    """Exact max of |D_2(n, t)| over targets allowed by the policy.

    Every solution of a target has X = x - y in one group (gamma(X) = N, X = n mod 2),
    so a group's size bounds the count of all its targets; groups are evaluated
    largest first until the bound drops to the best count found.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if not len(ps):
        return 0, None
    groups = _DifferenceGroups(ps, max_entries)
    packer = _n_packer(ps)
    span = int(np.prod(np.array(packer.base, dtype=object)))
    offset = span // 2
    N_of = groups.groups >> groups.k
    allowed = np.ones(groups.groups.size, dtype=bool)
    if policy == "nondegenerate-only":
        allowed = N_of != 0
    elif policy == "degenerate-only":
        allowed = N_of == 0
    cand = np.nonzero(allowed)[0]
    order = cand[np.lexsort((groups.groups[cand], -groups.size[cand]))]
    best, best_target = 0, None
    pos = 0
    budget = 4_000_000 // max(len(ps), 1) + 1
    while pos < order.size and int(groups.size[order[pos]]) > best:
        # a batch of groups whose bound beats the current best, histogrammed together
        batch = []
        total = 0
        while pos < order.size and int(groups.size[order[pos]]) > best and (not batch or total < budget):
            batch.append(int(order[pos]))
            total += int(groups.size[order[pos]])
            pos += 1
        bid = np.repeat(np.arange(len(batch), dtype=np.int64), groups.size[batch])
        Xs = np.concatenate([groups.X[groups.start[g] : groups.start[g] + groups.size[g]] for g in batch])
        hk, hc = _group_histogram(ps, Xs, packer.pack, labels=bid, span=span, offset=offset)
        if not hc.size:
            continue
        i = int(np.argmax(hc))
        if int(hc[i]) > best:
            best = int(hc[i])
            g = batch[int(hk[i] // span)]
            nkey = int(hk[i] % span) - offset
            best_target = _target_from_n(ps.gamma, packer.unpack(np.array([nkey]))[0], int(N_of[g]))
    return best, best_target


def fft_maximum(ps: PointSet, s: int, max_entries: int = DEFAULT_MAX_ENTRIES,
                workers: int = 1) -> tuple[int, Target | None]:
    """Exact max over all feasible targets from the dense s-fold convolution."""
    if not len(ps):
        return 0, None
    dense, origin = _fft_power(ps, s, max_entries, workers)
    flat = int(np.argmax(dense))
    idx = np.array(np.unravel_index(flat, dense.shape), dtype=np.int64) + origin
    best = int(dense.flat[flat])
    del dense
    return best, Target(tuple(int(c) for c in idx[:-1]), int(idx[-1]))


def surface_symmetries(ps: PointSet) -> list[np.ndarray]:
    """Signed permutation matrices that map the point set onto itself and preserve gamma."""
    if ps._symmetries is not None:
        return ps._symmetries
    k = ps.gamma.dim
    out = []
    for perm in itertools.permutations(range(k)):
        for signs in itertools.product((1, -1), repeat=k):
            g = np.zeros((k, k), dtype=np.int64)
            g[np.arange(k), perm] = signs
            img = ps.points @ g.T
            if np.array_equal(ps.gamma.values(img), ps.gvals) and ps.index.contains(img).all():
                out.append(g)
    ps._symmetries = out
    return out


def _orbit_weights(ps: PointSet, group: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Orbit representatives of the points under the group, with orbit sizes."""
    if len(group) <= 1:
        return np.arange(len(ps)), np.ones(len(ps), dtype=np.int64)
    B = ps.coordinate_bound()
    keys = np.stack([_lex_key(ps.points @ g.T, B) for g in group], axis=1)
    reps = np.nonzero(_lex_key(ps.points, B) == keys.min(axis=1))[0]
    srt = np.sort(keys[reps], axis=1)
    sizes = 1 + (np.diff(srt, axis=1) != 0).sum(axis=1)
    return reps, sizes.astype(np.int64)


def _lex_key(pts: np.ndarray, B: int) -> np.ndarray:
    key = np.zeros(pts.shape[0], dtype=np.int64)
    for i in range(pts.shape[1]):
        key = key * (2 * B + 1) + (pts[:, i] + B)
    return key


def fixed_n_maximum(ps: PointSet, n: Sequence[int], chunk: int = 4_000_000) -> tuple[int, int]:
    """Exact max over t of |D_3(n, t)| for one fixed n, and the maximising t.

    Symmetries of the shell fixing n act on solutions without changing t, so only
    orbit representatives of the first summand are scanned, weighted by orbit size.
    """
    n = np.asarray(n, dtype=np.int64)
    stab = [g for g in surface_symmetries(ps) if np.array_equal(g @ n, n)]
    reps, weights = _orbit_weights(ps, stab)
    acc = _Accumulator()
    step = max(1, chunk // max(len(ps), 1))
    for i in range(0, reps.size, step):
        sel = reps[i : i + step]
        x = ps.points[sel]
        # z = n - x - y must lie in the shell
        z = n[None, None, :] - x[:, None, :] - ps.points[None, :, :]
        ok = ps.index.contains(z.reshape(-1, z.shape[-1])).reshape(z.shape[:2])
        if not ok.any():
            continue
        a, b = np.nonzero(ok)
        t = ps.gvals[sel[a]] + ps.gvals[b] + ps.gamma.values(z[a, b])
        acc.add(t, weights[i + a])
    tk, tc = acc.result()
    if not tk.size:
        return 0, 0
    m = int(np.argmax(tc))
    return int(tc[m]), int(tk[m])


def _candidate_ns(seed: Target | None, scale: int, k: int) -> list[tuple[int, ...]]:
    """The origin and the previous argmax rescaled to the new level."""
    out = {tuple([0] * k)}
    if seed is not None:
        out.add(tuple(int(c) * scale for c in seed.n))
    return sorted(out)


def growth_profile(gamma: SurfaceMap, tau: NormMap, s: int, j_max: int,
                   policy: str = "all-feasible", window: tuple[int, int] | None = None,
                   j_min: int = 0, max_entries: int = DEFAULT_MAX_ENTRIES, workers: int = 1,
                   allow_lower_bounds: bool = True) -> GrowthProfile:
    """Shell-maximal counts M_j for j_min <= j <= j_max.

    s = 2 with quadratic gamma uses the exact pair-group search; s >= 3 uses the
    dense convolution while it fits the budget.  Past that, when allowed, s = 3
    rows become certified lower bounds: exact maxima over a few candidate n
    (the origin and the neighbourhood of the rescaled previous argmax).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if policy != "all-feasible" and not (s == 2 and gamma.quadratic):
        raise ValueError("degeneracy policies are defined only for s = 2 and quadratic gamma")
    if s < 2:
        raise ValueError("s must be >= 2")
    prof = GrowthProfile(s, gamma.kind, tau.kind, policy, window=window)
    last_exact: Target | None = None
    last_exact_j = None
    for j in range(j_min, j_max + 1):
        ps = shell_surface(gamma, tau, j)
        try:
            if s == 2 and gamma.quadratic:
                M, tgt = pair_maximum(ps, policy, max_entries)
                method = "pair-groups"
            elif s >= 3:
                try:
                    M, tgt = fft_maximum(ps, s, max_entries, workers)
                    method = "fft"
                except BudgetExceeded:
                    # sparse shells: the dense box is too large but the join may fit
                    table = surface_count_table(ps, s, "join", max_entries, workers)
                    _check_feasible(table, ps)
                    M, tgt = table.max_entry()
                    method = "join"
            else:
                table = surface_count_table(ps, s, "join", max_entries, workers)
                _check_feasible(table, ps)
                M, tgt = table.max_entry()
                method = "join"
            prof.rows.append(ProfileRow(j, M, True, tgt, method))
            last_exact, last_exact_j = tgt, j
        except BudgetExceeded:
            if not (allow_lower_bounds and s == 3):
                raise
            scale = 2 ** (j - last_exact_j) if last_exact_j is not None else 1
            best, best_t = 0, None
            for n in _candidate_ns(last_exact, scale, gamma.dim):
                c, t = fixed_n_maximum(ps, n)
                if c > best:
                    best, best_t = c, Target(n, t)
            prof.rows.append(ProfileRow(j, best, False, best_t, "candidate-n"))
    if not prof.rows:
        raise ValueError("empty M_j sequence")
    return prof
