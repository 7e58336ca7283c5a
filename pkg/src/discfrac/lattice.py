"""Integer lattice primitives: surface maps, norm maps, dyadic shells, sparse functions.

Every norm is carried by its exact integer square, so shell membership is an
integer comparison ``4**j <= tau2 < 4**(j+1)`` and never touches floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

INT64_MAX = 2**63 - 1
# 4**(MAX_SHELL_LEVEL + 1) must stay well inside int64 for the numpy kernels.
MAX_SHELL_LEVEL = 29
DEFAULT_MAX_ENTRIES = 50_000_000

SURFACE_KINDS = ("euclidean-square", "hyperbolic-quadratic", "pure-power")
NORM_KINDS = ("euclidean", "hyperbolic")


class BudgetExceeded(RuntimeError):
    """Raised when a computation would exceed an explicit resource budget."""


def checked(value: int) -> int:
    """Return ``value`` unchanged, raising OverflowError outside the int64 range."""
    if value > INT64_MAX or value < -INT64_MAX - 1:
        raise OverflowError(f"integer {value} does not fit in 64 bits")
    return value


def _as_point(m: Sequence[int] | int) -> tuple[int, ...]:
    if isinstance(m, (int, np.integer)):
        return (int(m),)
    return tuple(int(c) for c in m)


@dataclass(frozen=True)
class SurfaceMap:
    kind: str
    dim: int
    power: int = 2

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == "hyperbolic-quadratic" and self.dim != 2:
            raise ValueError("hyperbolic-quadratic requires dimension 2")
        if self.kind == "pure-power":
            if self.dim != 1:
                raise ValueError("pure-power requires dimension 1")
            if self.power < 1:
                raise ValueError("pure-power requires power >= 1")
        elif self.power != 2:
            object.__setattr__(self, "power", 2)

    @property
    def degree(self) -> int:
        """The d in the bound |gamma(m)| <= |m|**d."""
        return self.power

    @property
    def quadratic(self) -> bool:
        return self.kind in ("euclidean-square", "hyperbolic-quadratic")

    def values(self, points: np.ndarray) -> np.ndarray:
        """Vectorised gamma over an (M, k) int64 array."""
        pts = np.asarray(points, dtype=np.int64).reshape(-1, self.dim)
        if self.kind == "euclidean-square":
            return (pts * pts).sum(axis=1)
        if self.kind == "hyperbolic-quadratic":
            return pts[:, 0] * pts[:, 0] - pts[:, 1] * pts[:, 1]
        return np.abs(pts[:, 0]) ** self.power


@dataclass(frozen=True)
class NormMap:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == "hyperbolic" and self.dim != 2:
            raise ValueError("hyperbolic norm requires dimension 2")

    def squares(self, points: np.ndarray) -> np.ndarray:
        """Vectorised tau**2 over an (M, k) int64 array."""
        pts = np.asarray(points, dtype=np.int64).reshape(-1, self.dim)
        if self.kind == "euclidean":
            return (pts * pts).sum(axis=1)
        return np.abs(pts[:, 0] * pts[:, 0] - pts[:, 1] * pts[:, 1])


def gamma_eval(surface: SurfaceMap, m: Sequence[int] | int) -> int:
    p = _as_point(m)
    if len(p) != surface.dim:
        raise ValueError(f"point of dimension {len(p)} for a map on Z^{surface.dim}")
    if surface.kind == "euclidean-square":
        return checked(sum(c * c for c in p))
    if surface.kind == "hyperbolic-quadratic":
        return checked(p[0] * p[0] - p[1] * p[1])
    return checked(abs(p[0]) ** surface.power)


def tau_squared(norm: NormMap, m: Sequence[int] | int) -> int:
    p = _as_point(m)
    if len(p) != norm.dim:
        raise ValueError(f"point of dimension {len(p)} for a norm on Z^{norm.dim}")
    if norm.kind == "euclidean":
        return checked(sum(c * c for c in p))
    return checked(abs(p[0] * p[0] - p[1] * p[1]))


@dataclass(frozen=True)
class DyadicShell:
    level: int
    norm: NormMap

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("shell level must be >= 0")
        if self.level > MAX_SHELL_LEVEL:
            raise OverflowError(f"shell level {self.level} exceeds {MAX_SHELL_LEVEL}")

    @property
    def lower(self) -> int:
        return 4**self.level

    @property
    def upper(self) -> int:
        """Exclusive upper bound on tau**2."""
        return 4 ** (self.level + 1)

    def contains(self, m: Sequence[int] | int) -> bool:
        return self.lower <= tau_squared(self.norm, m) < self.upper

    def contains_tau2(self, tau2):
        return (tau2 >= self.lower) & (tau2 < self.upper)

    def coordinate_bound(self) -> int:
        """Largest |coordinate| of any shell point."""
        if self.norm.kind == "euclidean":
            return math.isqrt(self.upper - 1)
        # u = 1, v = upper - 1 (same parity) maximises |(u + v) / 2|
        return self.upper // 2


def isqrt_array(x: np.ndarray) -> np.ndarray:
    """Exact floor(sqrt(x)) for a nonnegative int64 array."""
    x = np.asarray(x, dtype=np.int64)
    r = np.floor(np.sqrt(x.astype(np.float64))).astype(np.int64)
    r -= (r * r > x).astype(np.int64)
    r += ((r + 1) * (r + 1) <= x).astype(np.int64)
    return r


def _euclidean_shell_array(k: int, lo: int, hi: int) -> np.ndarray:
    radius = math.isqrt(hi - 1)
    axis = np.arange(-radius, radius + 1, dtype=np.int64)
    sq = axis * axis
    prefix = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros(1, dtype=np.int64)
    for _ in range(k):
        rows, cols = np.nonzero(partial[:, None] + sq[None, :] < hi)
        prefix = np.column_stack([prefix[rows], axis[cols]])
        partial = partial[rows] + sq[cols]
    return prefix[partial >= lo]


def _count_parity(lo: np.ndarray, hi: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Number of integers v in [lo, hi] with v = r (mod 2); zero for empty ranges."""
    c = np.floor_divide(hi - r, 2) - np.floor_divide(lo - 1 - r, 2)
    return np.maximum(c, 0)


def _hyperbolic_uv_ranges(lo: int, hi: int):
    us = np.arange(1, hi, dtype=np.int64)
    vmin = -(-lo // us)
    vmax = (hi - 1) // us
    return us, vmin, vmax


def _hyperbolic_shell_array(lo: int, hi: int) -> np.ndarray:
    us, vmin, vmax = _hyperbolic_uv_ranges(lo, hi)
    counts = np.maximum(vmax - vmin + 1, 0)
    u = np.repeat(us, counts)
    start = np.repeat(np.cumsum(counts) - counts, counts)
    v = np.repeat(vmin, counts) + (np.arange(u.size, dtype=np.int64) - start)
    keep = (u - v) % 2 == 0
    u, v = u[keep], v[keep]
    # u*v > 0 for (u, v), (-u, -v); u*v < 0 for (u, -v), (-u, v)
    uu = np.concatenate([u, -u, u, -u])
    vv = np.concatenate([v, -v, -v, v])
    pts = np.column_stack([(uu + vv) // 2, (vv - uu) // 2])
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


def euclidean_ball_count(k: int, bound: int) -> int:
    """Number of m in Z^k with |m|**2 < bound."""
    if bound <= 0:
        return 0
    if k == 1:
        return 2 * math.isqrt(bound - 1) + 1
    if k == 2:
        r = math.isqrt(bound - 1)
        a = np.arange(-r, r + 1, dtype=np.int64)
        return int((2 * isqrt_array(bound - 1 - a * a) + 1).sum())
    r = math.isqrt(bound - 1)
    return sum(euclidean_ball_count(k - 1, bound - a * a) for a in range(-r, r + 1))


def hyperbolic_level_count(lo: int, hi: int) -> int:
    """Number of m in Z^2 with lo <= |m1^2 - m2^2| < hi, for lo >= 1."""
    us, vmin, vmax = _hyperbolic_uv_ranges(lo, hi)
    return 4 * int(_count_parity(vmin, vmax, us % 2).sum())


def shell_cardinality(shell: DyadicShell) -> int:
    """Exact |shell| by counting, without enumerating the points."""
    if shell.norm.kind == "euclidean":
        k = shell.norm.dim
        return euclidean_ball_count(k, shell.upper) - euclidean_ball_count(k, shell.lower)
    return hyperbolic_level_count(shell.lower, shell.upper)


def shell_array(shell: DyadicShell, max_entries: int = DEFAULT_MAX_ENTRIES) -> np.ndarray:
    """All shell points as an (M, k) int64 array in lexicographic order."""
    size = shell_cardinality(shell)
    if size * shell.norm.dim > max_entries:
        raise BudgetExceeded(
            f"shell level {shell.level} has {size} points, over the budget of {max_entries} entries"
        )
    if shell.norm.kind == "euclidean":
        return _euclidean_shell_array(shell.norm.dim, shell.lower, shell.upper)
    return _hyperbolic_shell_array(shell.lower, shell.upper)


def shell_points(shell: DyadicShell, k: int | None = None) -> Iterator[tuple[int, ...]]:
    """Yield every point of the shell exactly once, lexicographically."""
    if k is not None and k != shell.norm.dim:
        raise ValueError(f"dimension {k} does not match the norm on Z^{shell.norm.dim}")
    for row in shell_array(shell):
        yield tuple(int(c) for c in row)


def box_points(radius: int, k: int) -> Iterator[tuple[int, ...]]:
    rng = range(-radius, radius + 1)
    return itertools.product(rng, repeat=k)


class PointIndex:
    """Vectorised membership test for a finite set of lattice points."""

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=np.int64)
        self.dim = pts.shape[1]
        self.size = pts.shape[0]
        if self.size:
            self.offset = pts.min(axis=0)
            self.width = pts.max(axis=0) - self.offset + 1
        else:
            self.offset = np.zeros(self.dim, dtype=np.int64)
            self.width = np.ones(self.dim, dtype=np.int64)
        cells = int(np.prod(self.width.astype(object)))
        self._dense = None
        self._keys = None
        # a bool grid up to 64 MB beats binary search even when sparse
        if cells <= max(4 * self.size, 1 << 26):
            # one false cell of padding per side: clipped queries land there
            self._pw = self.width + 2
            self._dense = np.zeros(int(np.prod(self._pw)), dtype=bool)
            if self.size:
                self._dense[self._padded_flat(pts)] = True
        else:
            self._keys = np.unique(self._flat(pts))

    def _flat(self, pts: np.ndarray) -> np.ndarray:
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        for i in range(self.dim):
            idx = idx * self.width[i] + (pts[:, i] - self.offset[i])
        return idx

    def _padded_flat(self, pts: np.ndarray) -> np.ndarray:
        idx = None
        for i in range(self.dim):
            c = np.clip(pts[:, i] - (self.offset[i] - 1), 0, self._pw[i] - 1)
            idx = c if idx is None else idx * self._pw[i] + c
        return idx

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.dim)
        if not self.size:
            return np.zeros(pts.shape[0], dtype=bool)
        if self._dense is not None:
            return self._dense[self._padded_flat(pts)]
        rel = pts - self.offset
        ok = np.all((rel >= 0) & (rel < self.width), axis=1)
        out = np.zeros(pts.shape[0], dtype=bool)
        if not ok.any():
            return out
        flat = self._flat(pts[ok])
        pos = np.searchsorted(self._keys, flat)
        pos = np.minimum(pos, self._keys.size - 1)
        out[ok] = self._keys[pos] == flat
        return out


@dataclass(frozen=True)
class SparseLatticeFunction:
    """Finitely supported real (or complex) function on Z^dim; zeros are never stored."""

    dim: int
    entries: Mapping[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for pt, val in self.entries.items():
            p = _as_point(pt)
            if len(p) != self.dim:
                raise ValueError(f"point {p} is not in Z^{self.dim}")
            if val != 0:
                clean[p] = val
        object.__setattr__(self, "entries", clean)

    @classmethod
    def delta(cls, dim: int, at: Sequence[int] | None = None, value: float = 1.0):
        pt = tuple(at) if at is not None else (0,) * dim
        return cls(dim, {pt: value})

    @classmethod
    def from_arrays(cls, points: np.ndarray, values: np.ndarray):
        pts = np.asarray(points, dtype=np.int64)
        acc: dict[tuple[int, ...], float] = {}
        for row, val in zip(pts, np.asarray(values).tolist()):
            key = tuple(int(c) for c in row)
            acc[key] = acc.get(key, 0) + val
        return cls(pts.shape[1], acc)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, pt) -> complex:
        return self.entries.get(_as_point(pt), 0)

    def __add__(self, other: "SparseLatticeFunction") -> "SparseLatticeFunction":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        acc = dict(self.entries)
        for pt, val in other.entries.items():
            acc[pt] = acc.get(pt, 0) + val
        return SparseLatticeFunction(self.dim, acc)

    def scaled(self, c) -> "SparseLatticeFunction":
        return SparseLatticeFunction(self.dim, {p: c * v for p, v in self.entries.items()})

    def shifted(self, by: Sequence[int]) -> "SparseLatticeFunction":
        b = _as_point(by)
        return SparseLatticeFunction(
            self.dim, {tuple(x + y for x, y in zip(p, b)): v for p, v in self.entries.items()}
        )

    def support_array(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.array(list(self.entries), dtype=np.int64).reshape(-1, self.dim)

    def value_array(self) -> np.ndarray:
        return np.array(list(self.entries.values()))

    def items(self) -> Iterable[tuple[tuple[int, ...], complex]]:
        return sorted(self.entries.items())


def lp_norm(f: SparseLatticeFunction, p: float) -> float:
    if p < 1:
        raise ValueError(f"l^p norm needs p >= 1, got {p}")
    if not f.entries:
        return 0.0
    vals = np.abs(f.value_array()).astype(np.float64)
    if math.isinf(p):
        return float(vals.max())
    if p == 1:
        return float(vals.sum())
    return float((vals**p).sum() ** (1.0 / p))
