"""Shell cardinalities, the line-summation band count, and growth tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .lattice import DyadicShell, NormMap, shell_cardinality


def shell_size(norm: NormMap, k: int, j: int) -> int:
    if k != norm.dim:
        raise ValueError(f"dimension {k} does not match the norm on Z^{norm.dim}")
    return shell_cardinality(DyadicShell(j, norm))


def band_line_count(N: int, l: int) -> int:
    """Integers x >= 0 with N^2 <= 2*l*x + l^2 < 4*N^2, i.e. band points on y = x + l."""
    lo = N * N - l * l
    hi = 4 * N * N - l * l  # exclusive bound on 2*l*x
    if hi <= 0:
        return 0
    xmin = max(0, -(-lo // (2 * l)))
    xmax = (hi - 1) // (2 * l)
    return max(0, xmax - xmin + 1)


def hyperbolic_band_count_fast(N: int) -> int:
    """|{(x, y): 0 <= x < y, N^2 <= y^2 - x^2 < 4N^2}| by summing over the lines y = x + l."""
    if N <= 0:
        raise ValueError("N must be positive")
    return sum(band_line_count(N, l) for l in range(1, 2 * N))


def hyperbolic_band_count_rows(N: int) -> int:
    """The same band count, traversed row by row in y with integer square roots."""
    if N <= 0:
        raise ValueError("N must be positive")
    total = 0
    # y^2 - (y-1)^2 = 2y - 1 < 4N^2 bounds y
    for y in range(1, 2 * N * N + 1):
        # x^2 <= y^2 - N^2 and x^2 > y^2 - 4N^2, with 0 <= x < y
        top = y * y - N * N
        if top < 0:
            continue
        xmax = min(math.isqrt(top), y - 1)
        low = y * y - 4 * N * N
        xmin = 0 if low < 0 else math.isqrt(low) + 1
        if xmax >= xmin:
            total += xmax - xmin + 1
    return total


def hyperbolic_band_count_brute(N: int) -> int:
    """Double loop over the band; only for small N."""
    lo, hi = N * N, 4 * N * N
    return sum(
        1 for y in range(1, 2 * N * N + 1) for x in range(y) if lo <= y * y - x * x < hi
    )


def band_model(N: int) -> float:
    """Leading-order size (3/2) N^2 ln(2N) of the band, from summing 3N^2/(2l)."""
    return 1.5 * N * N * math.log(2 * N)


def hyperbolic_shell_from_band(j: int) -> int:
    """Full hyperbolic shell size from the band count by sign/swap symmetry.

    Band points with x > 0 have 8 images (+-x, +-y and swapped); the 2^j points
    with x = 0 have only 4.
    """
    N = 2**j
    return 8 * hyperbolic_band_count_fast(N) - 4 * N


@dataclass
class ShellSizeTable:
    norm: NormMap
    k: int
    rows: list[tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def constant(self) -> float:
        """Empirical max of count / model over the table."""
        return max(r[3] for r in self.rows)

    @property
    def floor(self) -> float:
        return min(r[3] for r in self.rows)


def shell_model(norm: NormMap, j: int) -> float:
    if norm.kind == "euclidean":
        return float(2 ** (norm.dim * j))
    return float(4**j * (j + 1))


def shell_growth_table(norm: NormMap, k: int, j_max: int) -> ShellSizeTable:
    table = ShellSizeTable(norm, k)
    for j in range(j_max + 1):
        count = shell_size(norm, k, j)
        model = shell_model(norm, j)
        table.rows.append((j, count, model, count / model))
    return table


def shell_size_upper_bound(norm: NormMap, j: int) -> float:
    """A rigorous upper bound for the size of shell j, valid for every j >= 0.

    Euclidean: the shell sits in the cube |m_i| < 2^{j+1}.  Hyperbolic: each
    N = m1^2 - m2^2 != 0 has at most 2 d(|N|) representations (same-parity factor
    pairs of both signs), and sum_{N < X} d(N) <= X (ln X + 1).
    """
    if norm.kind == "euclidean":
        return float((2 ** (j + 2) - 1) ** norm.dim)
    X = 4 ** (j + 1)
    return 4.0 * X * (math.log(X) + 1.0)


def weight_tail_bound(norm: NormMap, k: int, re_lam: float, J: int) -> float:
    """Upper bound for sum over shells j > J of |S_j| * 2^{-k Re(lam) j}.

    Uses shell_size_upper_bound and closed-form geometric sums; needs Re(lam) > 1.
    """
    if re_lam <= 1:
        raise ValueError("the weight sum converges only for Re(lambda) > 1")
    if norm.kind == "euclidean":
        r = 2.0 ** (k * (1.0 - re_lam))
        return 4.0**k * r ** (J + 1) / (1.0 - r)
    # 4 * 4^{j+1} ((j+1) ln 4 + 1) * 2^{-2 Re(lam) j} = 16 (a j + b) rho^j
    rho = 2.0 ** (2.0 - 2.0 * re_lam)
    a, b = math.log(4.0), math.log(4.0) + 1.0
    head = rho ** (J + 1)
    s0 = head / (1.0 - rho)
    s1 = head * ((J + 1) * (1.0 - rho) + rho) / (1.0 - rho) ** 2
    return 16.0 * (a * s1 + b * s0)
