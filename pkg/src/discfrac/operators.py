"""The operators J^{gamma,tau}_lambda and I_{k,lambda}: exact finite evaluation,
trivial bounds, divergence witnesses, region verdicts and the Christ refinement.

J f(n, t) = sum over m with tau(m) != 0 of f(n - m, t - gamma(m)) / |tau(m)|^{k lam}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .lattice import (
    DEFAULT_MAX_ENTRIES,
    BudgetExceeded,
    DyadicShell,
    NormMap,
    SparseLatticeFunction,
    SurfaceMap,
    lp_norm,
    shell_array,
)
from .shellgeom import weight_tail_bound

TOL = 1e-12


@dataclass(frozen=True)
class OperatorSpec:
    gamma: SurfaceMap
    tau: NormMap
    lam: complex = 0.5

    def __post_init__(self):
        if self.gamma.dim != self.tau.dim:
            raise ValueError("gamma and tau act on different dimensions")

    @property
    def k(self) -> int:
        return self.gamma.dim

    @property
    def re_lam(self) -> float:
        return float(complex(self.lam).real)

    @property
    def oscillatory(self) -> bool:
        return isinstance(self.lam, complex) and self.lam.imag != 0

    def weights(self, tau2: np.ndarray) -> np.ndarray:
        """(tau^2)^{-k lam / 2} from exact integer tau^2."""
        tau2 = np.asarray(tau2)
        if self.oscillatory:
            return np.power(tau2.astype(np.complex128), -self.k * self.lam / 2)
        return np.power(tau2.astype(np.float64), -self.k * self.re_lam / 2)

    def shell_scale(self, j: int):
        """The uniform dyadic weight 2^{-k lam j}."""
        if self.oscillatory:
            return complex(2.0) ** (-self.k * self.lam * j)
        return 2.0 ** (-self.k * self.re_lam * j)


@dataclass(frozen=True)
class Box:
    """Inclusive output window n_lo <= n <= n_hi (coordinatewise) and t_lo <= t <= t_hi."""

    n_lo: tuple[int, ...]
    n_hi: tuple[int, ...]
    t_lo: int
    t_hi: int

    @classmethod
    def cube(cls, k: int, R: int, t_lo: int, t_hi: int) -> "Box":
        return cls((-R,) * k, (R,) * k, t_lo, t_hi)

    @property
    def k(self) -> int:
        return len(self.n_lo)

    @property
    def empty(self) -> bool:
        return self.t_hi < self.t_lo or any(h < l for l, h in zip(self.n_lo, self.n_hi))

    def n_points(self) -> np.ndarray:
        if self.empty:
            return np.zeros((0, self.k), dtype=np.int64)
        axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(self.n_lo, self.n_hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.k)

    def size(self) -> int:
        if self.empty:
            return 0
        n = 1
        for l, h in zip(self.n_lo, self.n_hi):
            n *= h - l + 1
        return n * (self.t_hi - self.t_lo + 1)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.k + 1)
        ok = (pts[:, -1] >= self.t_lo) & (pts[:, -1] <= self.t_hi)
        for i in range(self.k):
            ok &= (pts[:, i] >= self.n_lo[i]) & (pts[:, i] <= self.n_hi[i])
        return ok

    def as_dict(self) -> dict:
        return {"n_lo": list(self.n_lo), "n_hi": list(self.n_hi), "t_lo": self.t_lo, "t_hi": self.t_hi}


def _check_dims(spec: OperatorSpec, f: SparseLatticeFunction):
    if f.dim != spec.k + 1:
        raise ValueError(f"f lives on Z^{f.dim}, operator needs Z^{spec.k + 1}")


def apply_point(spec: OperatorSpec, f: SparseLatticeFunction, at) -> complex | float:
    """Exact finite sum at one point, iterating over the support of f."""
    _check_dims(spec, f)
    n, t = (tuple(at.n), at.t) if hasattr(at, "n") else (tuple(at[:-1]), at[-1])
    if len(n) != spec.k:
        raise ValueError("evaluation point has the wrong dimension")
    supp = f.support_array()
    if not supp.shape[0]:
        return 0.0
    m = np.array(n, dtype=np.int64)[None, :] - supp[:, :-1]
    tau2 = spec.tau.squares(m)
    hit = (tau2 != 0) & (t - spec.gamma.values(m) == supp[:, -1])
    if not hit.any():
        return 0.0
    vals = f.value_array()[hit]
    total = (vals * spec.weights(tau2[hit])).sum()
    return complex(total) if np.iscomplexobj(total) else float(total)


def _scatter(f: SparseLatticeFunction, m: np.ndarray, gm: np.ndarray, w: np.ndarray,
             box: Box | None) -> SparseLatticeFunction:
    """sum over support points p and offsets m of f(p) w(m) at p + (m, gamma(m))."""
    supp = f.support_array()
    vals = f.value_array()
    keys: dict[tuple[int, ...], complex] = {}
    if not supp.shape[0] or not m.shape[0]:
        return SparseLatticeFunction(f.dim, {})
    off = np.column_stack([m, gm])
    pts_all, vals_all = [], []
    for p, v in zip(supp, vals):
        pts = p[None, :] + off
        if box is not None:
            ok = box.contains(pts)
            pts, ww = pts[ok], w[ok]
        else:
            ww = w
        if pts.shape[0]:
            pts_all.append(pts)
            vals_all.append(v * ww)
    if not pts_all:
        return SparseLatticeFunction(f.dim, {})
    P = np.concatenate(pts_all)
    V = np.concatenate(vals_all)
    order = np.lexsort(P.T[::-1])
    P, V = P[order], V[order]
    bounds = np.nonzero(np.any(np.diff(P, axis=0) != 0, axis=1))[0] + 1
    starts = np.concatenate([[0], bounds])
    sums = np.add.reduceat(V, starts)
    for row, s in zip(P[starts], sums.tolist()):
        if s != 0:
            keys[tuple(int(c) for c in row)] = s
    return SparseLatticeFunction(f.dim, keys)


def apply_box(spec: OperatorSpec, f: SparseLatticeFunction, box: Box,
              max_entries: int = DEFAULT_MAX_ENTRIES) -> SparseLatticeFunction:
    """J f on every point of the box; zero entries dropped."""
    _check_dims(spec, f)
    if box.k != spec.k:
        raise ValueError("box dimension does not match the operator")
    if box.empty or not len(f):
        return SparseLatticeFunction(f.dim, {})
    supp = f.support_array()
    # all offsets m that can land inside the n-window from some support point
    lo = np.array(box.n_lo) - supp[:, :-1].max(axis=0)
    hi = np.array(box.n_hi) - supp[:, :-1].min(axis=0)
    cells = int(np.prod((hi - lo + 1).astype(object)))
    if cells * len(f) > max_entries:
        raise BudgetExceeded(f"box evaluation needs {cells * len(f)} terms, budget {max_entries}")
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    m = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.k)
    tau2 = spec.tau.squares(m)
    m = m[tau2 != 0]
    w = spec.weights(tau2[tau2 != 0])
    return _scatter(f, m, spec.gamma.values(m), w, box)


def apply_dyadic(spec: OperatorSpec, j: int, f: SparseLatticeFunction,
                 box: Box | None = None) -> SparseLatticeFunction:
    """2^{-k lam j} times the sum over shell-j points m of f(n - m, t - gamma(m))."""
    _check_dims(spec, f)
    m = shell_array(DyadicShell(j, spec.tau))
    w = np.full(m.shape[0], spec.shell_scale(j))
    return _scatter(f, m, spec.gamma.values(m), w, box)


def apply_Ik_point(k: int, lam: float, f, n: int) -> float:
    """I_{k,lam} f(n) = sum over m >= 1 of f(n - m^k) / m^lam, exact over supp f."""
    if k < 1:
        raise ValueError("k must be >= 1")
    entries = f.entries if isinstance(f, SparseLatticeFunction) else dict(f)
    total = 0.0
    for key, v in entries.items():
        pt = key[0] if isinstance(key, tuple) else key
        d = n - pt
        if d < 1:
            continue
        m = round(d ** (1.0 / k))
        for c in (m - 1, m, m + 1):
            if c >= 1 and c**k == d:
                total += v / c**lam
    return total


# ---------------------------------------------------------------------------
# trivial bounds


def weight_sum(spec: OperatorSpec, J: int) -> float:
    """Exact sum over shells 0..J of |tau(m)|^{-k Re(lam)}."""
    total = 0.0
    for j in range(J + 1):
        tau2 = spec.tau.squares(shell_array(DyadicShell(j, spec.tau)))
        total += float(np.power(tau2.astype(np.float64), -spec.k * spec.re_lam / 2).sum())
    return total


@dataclass
class TrivialBoundReport:
    box: Box
    sup_Jf: float
    l1_f: float
    linf_f: float
    l1_ok: bool
    C: float | None = None
    C_truncated: float | None = None
    C_tail: float | None = None
    linf_ok: bool | None = None

    def as_dict(self) -> dict:
        return {
            "box": self.box.as_dict(), "sup_Jf": self.sup_Jf, "l1_f": self.l1_f,
            "linf_f": self.linf_f, "l1_ok": self.l1_ok, "C": self.C,
            "C_truncated": self.C_truncated, "C_tail": self.C_tail, "linf_ok": self.linf_ok,
        }


def default_box(spec: OperatorSpec, f: SparseLatticeFunction, R: int = 6) -> Box:
    """The support's bounding box widened by R in n, with every reachable t."""
    supp = f.support_array()
    if not supp.shape[0]:
        return Box((0,) * spec.k, (-1,) * spec.k, 0, -1)
    axes = [np.arange(-R, R + 1)] * spec.k
    m = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.k)
    g = spec.gamma.values(m)
    lo = supp.min(axis=0)
    hi = supp.max(axis=0)
    return Box(tuple(int(c) - R for c in lo[:-1]), tuple(int(c) + R for c in hi[:-1]),
               int(lo[-1] + g.min()), int(hi[-1] + g.max()))


def trivial_bound_check(spec: OperatorSpec, f: SparseLatticeFunction, box: Box | None = None,
                        J: int = 6) -> TrivialBoundReport:
    """||Jf||_inf <= ||f||_1 on the box; for Re(lam) > 1 also ||Jf||_inf <= C ||f||_inf.

    C is the exact weight sum over shells 0..J plus a rigorous tail bound.
    """
    if spec.re_lam < 0:
        raise ValueError("the l^1 -> l^inf bound needs Re(lambda) >= 0")
    box = box or default_box(spec, f)
    Jf = apply_box(spec, f, box)
    sup = lp_norm(Jf, math.inf)
    l1 = lp_norm(f, 1)
    linf = lp_norm(f, math.inf)
    rep = TrivialBoundReport(box, sup, l1, linf, sup <= l1 + TOL)
    if spec.re_lam > 1:
        rep.C_truncated = weight_sum(spec, J)
        rep.C_tail = weight_tail_bound(spec.tau, spec.k, spec.re_lam, J)
        rep.C = rep.C_truncated + rep.C_tail
        rep.linf_ok = sup <= rep.C * linf + TOL
    return rep


# ---------------------------------------------------------------------------
# divergence witnesses

FAMILIES = ("delta", "power-law", "hyperbolic-delta", "hyperbolic-power-law")


def sphere_counts(k: int, X: int) -> np.ndarray:
    """r_k(N) = |{n in Z^k : |n|^2 = N}| for 0 <= N <= X, by FFT convolution rounded exactly."""
    import scipy.fft

    r = math.isqrt(X)
    base = np.zeros(X + 1)
    xs = np.arange(-r, r + 1)
    np.add.at(base, xs * xs, 1.0)
    out = base.copy()
    for _ in range(k - 1):
        L = scipy.fft.next_fast_len(2 * X + 1, real=True)
        prod = scipy.fft.irfft(scipy.fft.rfft(out, L) * scipy.fft.rfft(base, L), L)[: X + 1]
        out = np.rint(prod)
        if float(np.abs(prod - out).max()) > 0.25:
            raise ArithmeticError("sphere count convolution lost exactness")
    return out.astype(np.int64)


def hyperbolic_weight_partials(a: float, Ts: Sequence[int]) -> np.ndarray:
    """sum over n in Z^2 with 0 < |n1^2 - n2^2| <= T^2 of |n1^2 - n2^2|^{-a}.

    n1^2 - n2^2 = +-u v with u = n1 - n2, v = n1 + n2 of equal parity, so the sum is
    4 sum_{u, v >= 1, u = v (2), u v <= X} (u v)^{-a}, evaluated with parity-split
    prefix sums of v^{-a}.
    """
    X = max(Ts) ** 2
    v = np.arange(1, X + 1, dtype=np.float64)
    w = v ** (-a)
    pref = []
    for par in (0, 1):
        wp = np.where((np.arange(1, X + 1) % 2) == par, w, 0.0)
        pref.append(np.concatenate([[0.0], np.cumsum(wp)]))
    out = []
    for T in Ts:
        Y = T * T
        u = np.arange(1, Y + 1)
        V = Y // u
        par = u % 2
        inner = np.where(par == 0, pref[0][V], pref[1][V])
        out.append(4.0 * float((u.astype(np.float64) ** (-a) * inner).sum()))
    return np.array(out)


def _inner_hyperbolic_sum(lam: float, M: int) -> np.ndarray:
    """H(M) = sum over 0 <= m2 < m1 <= M of (m1^2 - m2^2)^{-lam}, for 0 <= M <= max."""
    rows = np.zeros(M + 1)
    for m1 in range(1, M + 1):
        m2 = np.arange(m1, dtype=np.float64)
        rows[m1] = float(((m1 * m1 - m2 * m2) ** (-lam)).sum())
    return np.cumsum(rows)


def predicted_exponent(family: str, params: dict) -> float:
    """Closed-form growth exponent of the partial sums in T (0 means logarithmic)."""
    lam, q = params["lam"], params["q"]
    if family == "delta":
        k = params["k"]
        return max(0.0, k - k * lam * q)
    if family == "hyperbolic-delta":
        return max(0.0, 2 - 2 * lam * q)
    k = params.get("k", 2) if family == "power-law" else 2
    d, alpha, beta = params["d"], params["alpha"], params["beta"]
    return max(0.0, -q * (alpha - k * (1 - lam)) - q * d * beta + d + k)


@dataclass
class DivergenceFit:
    family: str
    params: dict
    Ts: list[int]
    partial_sums: list[float]
    exponent: float
    predicted: float

    def as_dict(self) -> dict:
        return {"family": self.family, "params": self.params, "T": self.Ts,
                "partial_sums": self.partial_sums, "exponent": self.exponent,
                "predicted": self.predicted}


def divergence_partials(family: str, params: dict, Ts: Sequence[int]) -> np.ndarray:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    lam, q = float(params["lam"]), float(params["q"])
    X = max(Ts) ** 2
    if family == "hyperbolic-delta":
        return hyperbolic_weight_partials(lam * q, Ts)
    k = int(params.get("k", 2))
    if family.startswith("hyperbolic") and k != 2:
        raise ValueError("hyperbolic families live in dimension k = 2")
    r = sphere_counts(k, X).astype(np.float64)
    N = np.arange(X + 1, dtype=np.float64)
    terms = np.zeros(X + 1)
    if family == "delta":
        terms[1:] = r[1:] * N[1:] ** (-k * lam * q / 2)
    elif family == "power-law":
        e = -q * (params["alpha"] - k * (1 - lam)) - q * params["d"] * params["beta"] + params["d"]
        terms[2:] = r[2:] * N[2:] ** (e / 2)
    else:
        # the lower-bound summand |n|^{-q alpha} H(|n|/sqrt 2)^q |n|^{-q d beta + d}, |n| >= 2
        alpha, beta, d = params["alpha"], params["beta"], params["d"]
        H = _inner_hyperbolic_sum(lam, math.isqrt(X // 2))
        Ms = _isqrt_vec(np.arange(X + 1) // 2)
        terms[4:] = r[4:] * N[4:] ** ((-q * alpha - q * d * beta + d) / 2) * H[Ms[4:]] ** q
    cum = np.cumsum(terms)
    return np.array([cum[T * T] for T in Ts])


def _isqrt_vec(x: np.ndarray) -> np.ndarray:
    r = np.floor(np.sqrt(x.astype(np.float64))).astype(np.int64)
    r -= (r * r > x)
    r += ((r + 1) * (r + 1) <= x)
    return r


def default_Ts() -> list[int]:
    return [2**e for e in range(4, 13)]


def divergence_exponent(family: str, params: dict, Ts: Sequence[int] | None = None) -> DivergenceFit:
    """Least-squares slope of log(partial sum) against log T."""
    Ts = list(Ts) if Ts is not None else default_Ts()
    if len(Ts) < 4 or any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ValueError("need at least 4 increasing T values")
    S = divergence_partials(family, params, Ts)
    if np.any(S <= 0):
        raise ValueError("partial sums must be positive to fit an exponent")
    slope = float(np.polyfit(np.log(Ts), np.log(S), 1)[0])
    return DivergenceFit(family, dict(params), Ts, [float(s) for s in S], slope,
                         predicted_exponent(family, params))


# ---------------------------------------------------------------------------
# region verdicts


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class RegionVerdict:
    inv_p: Fraction
    inv_q: Fraction
    lam: Fraction
    verdict: str
    s: int
    k: int
    d: int
    sufficient: bool
    necessary: bool
    impossible_s: bool
    conflict: bool
    lambda_c_s: Fraction
    lambda_c_k: Fraction

    def as_dict(self) -> dict:
        return {
            "inv_p": float(self.inv_p), "inv_q": float(self.inv_q), "lam": float(self.lam),
            "verdict": self.verdict, "s": self.s, "k": self.k, "d": self.d,
            "sufficient": self.sufficient, "necessary": self.necessary,
            "impossible_s": self.impossible_s, "conflict": self.conflict,
            "lambda_c_s": float(self.lambda_c_s), "lambda_c_k": float(self.lambda_c_k),
        }


def sufficient_region(lam, inv_p, inv_q, s: int) -> bool:
    lam, ip, iq = _frac(lam), _frac(inv_p), _frac(inv_q)
    return iq < ip - (1 - lam) / s and iq < lam and ip > 1 - lam


def necessary_region(lam, inv_p, inv_q, k: int, d: int) -> bool:
    lam, ip, iq = _frac(lam), _frac(inv_p), _frac(inv_q)
    return iq < lam and ip > 1 - lam and iq <= ip - Fraction(k, k + d) * (1 - lam)


def impossibility_predicate(s: int, k: int, d: int) -> bool:
    """gamma = O(|m|^d) on Z^k cannot have the (s, eps)-Property when s > d/k + 1."""
    return Fraction(s) > Fraction(d, k) + 1


def region_verdict(lam, inv_p, inv_q, s: int = 2, k: int = 2, d: int = 2) -> RegionVerdict:
    """Classify (1/p, 1/q) against the sufficient and necessary conditions.

    If both fire at once the sufficient condition rests on an (s, eps)-Property
    that the impossibility predicate rules out; the verdict is then
    outside-necessary with conflict set.
    """
    lam_f, ip, iq = _frac(lam), _frac(inv_p), _frac(inv_q)
    if not (0 < lam_f < 1):
        raise ValueError("lambda must lie in (0, 1)")
    if not (0 <= ip <= 1 and 0 <= iq <= 1):
        raise ValueError("1/p and 1/q must lie in [0, 1]")
    if s < 1 or k < 1 or d < 0:
        raise ValueError("need s >= 1, k >= 1, d >= 0")
    suff = sufficient_region(lam_f, ip, iq, s)
    nec = necessary_region(lam_f, ip, iq, k, d)
    conflict = suff and not nec
    if not nec:
        verdict = "outside-necessary"
    elif suff:
        verdict = "inside-sufficient"
    else:
        verdict = "gap"
    return RegionVerdict(ip, iq, lam_f, verdict, s, k, d, suff, nec,
                         impossibility_predicate(s, k, d), conflict,
                         Fraction(s - 1, 2 * s - 1), Fraction(2, k + 4))


def ik_conjecture_region(k: int, lam, inv_p, inv_q) -> bool:
    """The conjectured l^p -> l^q region of I_{k,lam}."""
    lam, ip, iq = _frac(lam), _frac(inv_p), _frac(inv_q)
    return iq <= ip - (1 - lam) / k and iq < lam and ip > 1 - lam


def ik_sufficient_region(s: int, lam, inv_p, inv_q) -> bool:
    """Region implied for I_{k,lam} by r_{s,k}(N) = O(N^eps)."""
    return sufficient_region(lam, inv_p, inv_q, s)


# ---------------------------------------------------------------------------
# Christ refinement


def dyadic_action(spec: OperatorSpec, j: int, box: Box) -> tuple[sp.csr_matrix, np.ndarray]:
    """Matrix of J_{lam,j} restricted to the box: T[y, x] = 2^{-k lam j} when y - x = (m, gamma(m))."""
    nb = box.n_points()
    ts = np.arange(box.t_lo, box.t_hi + 1, dtype=np.int64)
    pts = np.column_stack([np.repeat(nb, ts.size, axis=0), np.tile(ts, nb.shape[0])]) if nb.size else np.zeros((0, spec.k + 1), np.int64)
    index = {tuple(p): i for i, p in enumerate(pts.tolist())}
    m = shell_array(DyadicShell(j, spec.tau))
    off = np.column_stack([m, spec.gamma.values(m)])
    rows, cols = [], []
    for x, p in enumerate(pts):
        for y in (p[None, :] + off)[box.contains(p[None, :] + off)].tolist():
            rows.append(index[tuple(y)])
            cols.append(x)
    scale = spec.shell_scale(j)
    T = sp.csr_matrix((np.full(len(rows), scale), (rows, cols)), shape=(len(pts), len(pts)))
    return T, pts


@dataclass
class ChristState:
    alpha: float
    beta: float
    deltas: list[float]
    epsilons: list[float]
    E: list[np.ndarray] = field(default_factory=list)
    F: list[np.ndarray] = field(default_factory=list)
    first_empty_level: int | None = None
    F_empty: bool = False

    def ratio(self, s: int) -> float | None:
        """alpha^{2s-1} |F|^{s-1} / |E|^s, measured rather than bounded."""
        if not self.E or not self.E[0].size:
            return None
        return self.alpha ** (2 * s - 1) * self.F[0].size ** (s - 1) / self.E[0].size ** s

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha, "beta": self.beta, "F_empty": self.F_empty,
            "first_empty_level": self.first_empty_level,
            "E_sizes": [int(e.size) for e in self.E], "F_sizes": [int(f.size) for f in self.F],
            "deltas": self.deltas, "epsilons": self.epsilons,
        }


def christ_defaults(L: int) -> list[float]:
    return [4.0 ** (-(l + 1)) for l in range(L)]


def christ_refine(T, E: Iterable[int], alpha: float, deltas: Sequence[float] | None = None,
                  epsilons: Sequence[float] | None = None, levels: int = 4) -> ChristState:
    """Nested sets E_l, F_l for a nonnegative action T (rows: Y, columns: X).

    F = {y : alpha < T chi_E(y) < 2 alpha}, beta = <chi_F, T chi_E> / |E|,
    E_{l+1} = {x in E_l : T* chi_{F_l}(x) >= delta_l beta},
    F_{l+1} = {y in F_l : T chi_{E_{l+1}}(y) >= eps_l alpha}.
    """
    T = sp.csr_matrix(T)
    if T.nnz and (not np.all(np.isfinite(T.data)) or (T.data < 0).any()):
        raise ValueError("the action must be finite and nonnegative")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    deltas = list(deltas) if deltas is not None else christ_defaults(levels)
    epsilons = list(epsilons) if epsilons is not None else christ_defaults(levels)
    if len(deltas) < levels or len(epsilons) < levels or min(deltas + epsilons, default=1) <= 0:
        raise ValueError("need a positive delta and epsilon for every level")
    nY, nX = T.shape
    E0 = np.unique(np.fromiter(E, dtype=np.int64))
    chiE = np.zeros(nX)
    chiE[E0] = 1.0
    TE = T @ chiE
    F0 = np.nonzero((TE > alpha) & (TE < 2 * alpha))[0]
    st = ChristState(float(alpha), 0.0, deltas[:levels], epsilons[:levels], [E0], [F0])
    if not F0.size:
        st.F_empty = True
        return st
    st.beta = float(TE[F0].sum()) / E0.size
    Tt = T.T.tocsr()
    El, Fl = E0, F0
    for l in range(levels):
        chiF = np.zeros(nY)
        chiF[Fl] = 1.0
        TsF = Tt @ chiF
        El = El[TsF[El] >= deltas[l] * st.beta]
        chiE = np.zeros(nX)
        chiE[El] = 1.0
        TEl = T @ chiE
        Fl = Fl[TEl[Fl] >= epsilons[l] * alpha]
        st.E.append(El)
        st.F.append(Fl)
        if st.first_empty_level is None and (not El.size or not Fl.size):
            st.first_empty_level = l + 1
    return st


def recheck_christ_dyadic(state: ChristState, spec: OperatorSpec, j: int, pts: np.ndarray,
                          box: Box) -> list[str]:
    """Re-derive every set of the state from shell sums, without the action matrix.

    Membership of x in E_{l+1} is sum_m chi_{F_l}(x + (m, gamma(m))) >= 2^{k lam j} delta_l beta,
    and of y in F_{l+1} is sum_m chi_{E_{l+1}}(y - (m, gamma(m))) >= 2^{k lam j} eps_l alpha.
    Returns a list of violations (empty when consistent).
    """
    m = shell_array(DyadicShell(j, spec.tau))
    off = np.column_stack([m, spec.gamma.values(m)])
    scale = 2.0 ** (spec.k * spec.re_lam * j)
    where = {tuple(p): i for i, p in enumerate(pts.tolist())}

    def hits(i: int, members: set[int], sign: int) -> int:
        c = 0
        for q in (pts[i][None, :] + sign * off).tolist():
            if tuple(q) in where and where[tuple(q)] in members:
                c += 1
        return c

    bad = []
    E0 = set(state.E[0].tolist())
    TE = {y: hits(y, E0, -1) / scale for y in range(len(pts))}
    F0 = {y for y, v in TE.items() if state.alpha < v < 2 * state.alpha}
    if F0 != set(state.F[0].tolist()):
        bad.append("F differs from {alpha < T chi_E < 2 alpha}")
    if F0:
        beta = sum(TE[y] for y in F0) / len(E0)
        if abs(beta - state.beta) > TOL * max(1.0, beta):
            bad.append(f"beta {state.beta} != {beta}")
    for l in range(len(state.E) - 1):
        Fl = set(state.F[l].tolist())
        want_E = {x for x in state.E[l].tolist() if hits(x, Fl, 1) >= scale * state.deltas[l] * state.beta}
        if want_E != set(state.E[l + 1].tolist()):
            bad.append(f"E_{l + 1} violates its defining inequality")
        want_F = {y for y in state.F[l].tolist() if hits(y, want_E, -1) >= scale * state.epsilons[l] * state.alpha}
        if want_F != set(state.F[l + 1].tolist()):
            bad.append(f"F_{l + 1} violates its defining inequality")
    return bad
