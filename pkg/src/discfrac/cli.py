"""Command-line front end: ``discfrac <subcommand> [flags]``.

Tabular series go out as CSV (a ``# config:`` line, a header row, LF endings),
records and verdicts as JSON lines whose first object echoes the config.
Exit status 2 means invalid parameters, 3 means a resource budget was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Iterable

import numpy as np

from . import __version__
from .diocount import POLICIES, Target, count_table, dio_count_shell, growth_profile, verify_pair_reduction
from .lattice import (
    DEFAULT_MAX_ENTRIES,
    MAX_SHELL_LEVEL,
    BudgetExceeded,
    NormMap,
    SparseLatticeFunction,
    SurfaceMap,
)
from .operators import (
    FAMILIES,
    Box,
    OperatorSpec,
    apply_box,
    apply_point,
    christ_refine,
    default_Ts,
    divergence_exponent,
    dyadic_action,
    recheck_christ_dyadic,
    region_verdict,
    trivial_bound_check,
)
from .repcount import jacobi_r22, record_scan, rep_count_table, two_square_lattice_count
from .shellgeom import hyperbolic_band_count_fast, band_model, shell_growth_table

GAMMA_ALIASES = {
    "euclid-sq": "euclidean-square", "euclidean-square": "euclidean-square", "paraboloid": "euclidean-square",
    "hyperbolic": "hyperbolic-quadratic", "hyp": "hyperbolic-quadratic",
    "hyperbolic-quadratic": "hyperbolic-quadratic", "pure-power": "pure-power", "power": "pure-power",
}
TAU_ALIASES = {"euclid": "euclidean", "euclidean": "euclidean", "hyperbolic": "hyperbolic", "hyp": "hyperbolic"}


class InvalidParameters(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    params: dict[str, Any] = field(default_factory=dict)
    format: str = "csv"
    out: str | None = None
    workers: int = 1
    max_entries: int = DEFAULT_MAX_ENTRIES

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, "format": self.format, "workers": self.workers,
                "max_entries": self.max_entries, "version": __version__, **self.params}


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Fraction):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o)}")


class Emitter:
    """Buffers every record, then writes them in order so output is deterministic."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.header: list[str] | None = None
        self.rows: list[list] = []
        self.records: list[dict] = []
        self.summary: dict | None = None

    def table(self, header: list[str], rows: Iterable[Iterable]):
        self.header = header
        self.rows.extend([list(r) for r in rows])

    def record(self, rec: dict):
        self.records.append(rec)

    def render(self) -> str:
        buf = io.StringIO()
        cfg = self.cfg.echo()
        if self.cfg.format == "csv":
            buf.write("# config: " + _json(cfg) + "\n")
            w = csv.writer(buf, lineterminator="\n")
            if self.header is not None:
                w.writerow(self.header)
                for r in self.rows:
                    w.writerow([_cell(c) for c in r])
            else:
                keys = sorted({k for rec in self.records for k in rec})
                w.writerow(keys)
                for rec in self.records:
                    w.writerow([_cell(rec.get(k, "")) for k in keys])
            if self.summary is not None:
                buf.write("# summary: " + _json(self.summary) + "\n")
        else:
            buf.write(_json({"config": cfg}) + "\n")
            if self.header is not None:
                for r in self.rows:
                    buf.write(_json(dict(zip(self.header, r))) + "\n")
            for rec in self.records:
                buf.write(_json(rec) + "\n")
            if self.summary is not None:
                buf.write(_json({"summary": self.summary}) + "\n")
        return buf.getvalue()


def _cell(c):
    if isinstance(c, bool):
        return "true" if c else "false"
    if isinstance(c, float):
        return repr(c)
    if isinstance(c, (list, tuple, dict)):
        return _json(c)
    return c


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError as exc:
        raise InvalidParameters(f"expected comma-separated integers, got {text!r}") from exc


def _gamma(name: str, k: int, d: int | None = None) -> SurfaceMap:
    kind = GAMMA_ALIASES.get(name)
    if kind is None:
        raise InvalidParameters(f"unknown gamma {name!r}")
    try:
        return SurfaceMap(kind, k, d if (kind == "pure-power" and d) else 2)
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from exc


def _tau(name: str, k: int) -> NormMap:
    kind = TAU_ALIASES.get(name)
    if kind is None:
        raise InvalidParameters(f"unknown tau {name!r}")
    try:
        return NormMap(kind, k)
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from exc


def _level(j: int, name: str = "j"):
    if not (0 <= j <= MAX_SHELL_LEVEL):
        raise InvalidParameters(f"{name} must lie in [0, {MAX_SHELL_LEVEL}]")


# ---------------------------------------------------------------------------
# subcommands


def cmd_shells(a, cfg: RunConfig, em: Emitter):
    _level(a.jmax, "jmax")
    tau = _tau(a.tau, a.k)
    table = shell_growth_table(tau, a.k, a.jmax)
    em.table(["j", "count", "model", "ratio"], table.rows)
    summary = {"constant": table.constant, "floor": table.floor}
    if a.band:
        summary["band"] = [
            {"N": 2**j, "band": hyperbolic_band_count_fast(2**j),
             "ratio": hyperbolic_band_count_fast(2**j) / band_model(2**j)}
            for j in range(min(a.jmax, 9) + 1)
        ]
    em.summary = summary


def cmd_repcount(a, cfg: RunConfig, em: Emitter):
    if a.max < 1:
        raise InvalidParameters("--max must be >= 1")
    if a.jacobi_check:
        rows = []
        for N in range(1, a.max + 1):
            lat, jac = two_square_lattice_count(N), jacobi_r22(N)
            rows.append([N, lat, jac, lat == jac])
        em.table(["N", "lattice", "jacobi", "ok"], rows)
        em.summary = {"all_ok": all(r[3] for r in rows), "rows": len(rows)}
        return
    if a.s < 1 or a.k < 1:
        raise InvalidParameters("need s >= 1 and k >= 1")
    if a.records:
        scan = record_scan(a.s, a.k, a.max, cfg.max_entries)
        em.table(["N", "r"], scan.records)
        em.summary = {"records": len(scan.records)}
        return
    r = rep_count_table(a.s, a.k, a.max, a.mode, cfg.max_entries)
    em.table(["N", "r"], [[N, int(r[N])] for N in range(1, a.max + 1)])


def cmd_diocount(a, cfg: RunConfig, em: Emitter):
    _level(a.j)
    gamma = _gamma(a.gamma, a.k, a.d)
    tau = _tau(a.tau, a.k)
    if a.s < 2:
        raise InvalidParameters("s must be >= 2")
    if a.reduction_check:
        if a.s != 2 or not gamma.quadratic:
            raise InvalidParameters("the reduction check needs s = 2 and quadratic gamma")
        rep = verify_pair_reduction(gamma, tau, a.j, max_entries=cfg.max_entries)
        em.record({"j": a.j, "targets": rep.targets, "pairs": rep.pairs,
                   "mismatches": rep.mismatches, "degenerate_targets": rep.degenerate_targets,
                   "ok": rep.ok})
        return
    if a.n is not None:
        n = _ints(a.n)
        if len(n) != gamma.dim or a.t is None:
            raise InvalidParameters("--n needs k comma-separated integers and --t")
        c = dio_count_shell(gamma, tau, a.s, a.j, Target(n, a.t))
        em.record({"n": list(n), "t": a.t, "count": c})
        return
    table = count_table(gamma, tau, a.s, a.j, max_entries=cfg.max_entries, workers=cfg.workers)
    T = table.targets()
    header = [f"n{i + 1}" for i in range(gamma.dim)] + ["t", "count"]
    em.table(header, [list(map(int, r)) + [int(c)] for r, c in zip(T, table.counts)])
    best, tgt = table.max_entry()
    em.summary = {"targets": len(table), "total": table.total(), "max": best,
                  "argmax": tgt.as_row() if tgt else None}


def cmd_profile(a, cfg: RunConfig, em: Emitter):
    _level(a.jmax, "jmax")
    gamma = _gamma(a.gamma, a.k, a.d)
    tau = _tau(a.tau, a.k)
    window = _ints(a.window) if a.window else None
    if window is not None and len(window) != 2:
        raise InvalidParameters("--window takes lo,hi")
    try:
        prof = growth_profile(gamma, tau, a.s, a.jmax, a.policy, window=window, j_min=a.jmin,
                              max_entries=cfg.max_entries, workers=cfg.workers,
                              allow_lower_bounds=not a.exact_only)
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from exc
    em.table(["j", "M_j", "exact", "method", "target"],
             [[r.j, r.M, r.exact, r.method, list(r.target.as_row()) if r.target else None]
              for r in prof.rows])
    em.summary = prof.summary()


def _input_function(a, k: int) -> SparseLatticeFunction:
    if a.f == "delta":
        return SparseLatticeFunction.delta(k + 1)
    if a.f.startswith("random"):
        parts = a.f.split(":")
        seed = int(parts[1]) if len(parts) > 1 else 0
        size = int(parts[2]) if len(parts) > 2 else 8
        rng = np.random.default_rng(seed)
        pts = rng.integers(-4, 5, size=(size, k + 1))
        return SparseLatticeFunction.from_arrays(pts, rng.random(size))
    raise InvalidParameters("--f is 'delta' or 'random[:seed[:size]]'")


def cmd_operator(a, cfg: RunConfig, em: Emitter):
    gamma = _gamma(a.gamma, 2)
    tau = _tau(a.tau, 2)
    spec = OperatorSpec(gamma, tau, a.lam)
    f = _input_function(a, 2)
    if a.trivial_check:
        rep = trivial_bound_check(spec, f)
        em.record(rep.as_dict())
        return
    if a.at:
        pt = _ints(a.at)
        if len(pt) != 3:
            raise InvalidParameters("--at takes n1,n2,t")
        em.record({"at": list(pt), "value": apply_point(spec, f, pt)})
        return
    R = a.box
    box = Box((-R, -R), (R, R), a.tmin, a.tmax)
    out = apply_box(spec, f, box, cfg.max_entries)
    em.table(["n1", "n2", "t", "value"], [list(p) + [v] for p, v in out.items()])
    em.summary = {"box": box.as_dict(), "support": len(out)}


def cmd_diverge(a, cfg: RunConfig, em: Emitter):
    params = {"lam": a.lam, "q": a.q}
    if a.family in ("delta", "power-law"):
        params["k"] = a.k
    if "power-law" in a.family:
        params.update({"d": a.d, "alpha": a.alpha, "beta": a.beta})
    if a.tmax < 4:
        raise InvalidParameters("--tmax must be >= 4")
    Ts = [T for T in default_Ts() if T <= 2**a.tmax] if a.tmax <= 12 else [2**e for e in range(4, a.tmax + 1)]
    try:
        fit = divergence_exponent(a.family, params, Ts)
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from exc
    em.table(["T", "partial_sum"], zip(fit.Ts, fit.partial_sums))
    em.summary = {"family": a.family, "params": params, "exponent": fit.exponent,
                  "predicted": fit.predicted}


def cmd_region(a, cfg: RunConfig, em: Emitter):
    try:
        if a.inv_p is not None or a.inv_q is not None:
            if a.inv_p is None or a.inv_q is None:
                raise InvalidParameters("--inv-p and --inv-q go together")
            em.record(region_verdict(a.lam, a.inv_p, a.inv_q, a.s, a.k, a.d).as_dict())
            return
        step = Fraction(str(a.grid))
        if step <= 0 or step > 1:
            raise InvalidParameters("--grid must lie in (0, 1]")
        n = int(1 / step)
        for i in range(n + 1):
            for jq in range(n + 1):
                em.record(region_verdict(Fraction(str(a.lam)), i * step, jq * step, a.s, a.k, a.d).as_dict())
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from exc


def cmd_christ(a, cfg: RunConfig, em: Emitter):
    gamma = _gamma(a.gamma, 2)
    tau = _tau(a.tau, 2)
    spec = OperatorSpec(gamma, tau, a.lam)
    _level(a.j)
    side = a.side
    box = Box((0, 0), (side - 1, side - 1), 0, side - 1)
    T, pts = dyadic_action(spec, a.j, box)
    if a.E == "center":
        E = [len(pts) // 2]
    else:
        E = list(_ints(a.E))
        if any(not (0 <= e < len(pts)) for e in E):
            raise InvalidParameters("E indices lie outside the box")
    try:
        st = christ_refine(T, E, a.alpha, levels=a.levels)
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from exc
    rec = st.as_dict()
    rec["violations"] = recheck_christ_dyadic(st, spec, a.j, pts, box)
    rec["ratio_s2"] = st.ratio(2)
    rec["ratio_s3"] = st.ratio(3)
    em.record(rec)


COMMANDS = {
    "shells": cmd_shells, "repcount": cmd_repcount, "diocount": cmd_diocount,
    "profile": cmd_profile, "operator": cmd_operator, "diverge": cmd_diverge,
    "region": cmd_region, "christ": cmd_christ,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "jsonl"), default=None)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--max-entries", type=int, default=DEFAULT_MAX_ENTRIES)

    p = argparse.ArgumentParser(prog="discfrac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("shells", parents=[common], help="dyadic shell sizes and model ratios")
    s.add_argument("--tau", default="euclid")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--jmax", type=int, default=6)
    s.add_argument("--band", action="store_true", help="also report the hyperbolic band counts")

    s = sub.add_parser("repcount", parents=[common], help="r_{s,k}(N), records, Jacobi check")
    s.add_argument("--s", type=int, default=3)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--max", type=int, default=10000)
    s.add_argument("--mode", choices=("positive", "signed-squares"), default="positive")
    s.add_argument("--records", action="store_true")
    s.add_argument("--jacobi-check", action="store_true")

    for name, helptext in (("diocount", "exact |D_s(n, t)| counts"), ("profile", "growth profile M_j")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--gamma", default="euclid-sq")
        s.add_argument("--tau", default="euclid")
        s.add_argument("--k", type=int, default=2)
        s.add_argument("--d", type=int, default=None, help="power for pure-power gamma")
        s.add_argument("--s", type=int, default=2)
        if name == "diocount":
            s.add_argument("--j", type=int, default=2)
            s.add_argument("--n", default=None, help="target n as comma-separated integers")
            s.add_argument("--t", type=int, default=None)
            s.add_argument("--reduction-check", action="store_true")
        else:
            s.add_argument("--jmax", type=int, default=5)
            s.add_argument("--jmin", type=int, default=0)
            s.add_argument("--policy", choices=POLICIES, default="all-feasible")
            s.add_argument("--window", default=None, help="fit window lo,hi")
            s.add_argument("--exact-only", action="store_true")

    s = sub.add_parser("operator", parents=[common], help="evaluate J on a point or box")
    s.add_argument("--gamma", default="euclid-sq")
    s.add_argument("--tau", default="euclid")
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--f", default="delta")
    s.add_argument("--at", default=None, help="n1,n2,t")
    s.add_argument("--box", type=int, default=3, help="n-radius of the output box")
    s.add_argument("--tmin", type=int, default=-20)
    s.add_argument("--tmax", type=int, default=20)
    s.add_argument("--trivial-check", action="store_true")

    s = sub.add_parser("diverge", parents=[common], help="necessary-condition divergence fits")
    s.add_argument("--family", choices=FAMILIES, default="delta")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--q", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=1.2)
    s.add_argument("--beta", type=float, default=0.6)
    s.add_argument("--tmax", type=int, default=12, help="largest T as a power of two")

    s = sub.add_parser("region", parents=[common], help="sufficient/necessary region verdicts")
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--s", type=int, default=2)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--inv-p", type=float, default=None)
    s.add_argument("--inv-q", type=float, default=None)
    s.add_argument("--grid", type=float, default=0.05)

    s = sub.add_parser("christ", parents=[common], help="Christ refinement on a dyadic action")
    s.add_argument("--gamma", default="euclid-sq")
    s.add_argument("--tau", default="euclid")
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--j", type=int, default=0)
    s.add_argument("--side", type=int, default=5)
    s.add_argument("--E", default="center", help="'center' or comma-separated box indices")
    s.add_argument("--alpha", type=float, default=0.75)
    s.add_argument("--levels", type=int, default=4)
    return p


DEFAULT_FORMAT = {"operator": "csv", "region": "jsonl", "christ": "jsonl"}


def run(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    fmt = a.format or DEFAULT_FORMAT.get(a.subcommand, "csv")
    params = {k: v for k, v in sorted(vars(a).items())
              if k not in ("format", "out", "workers", "max_entries", "subcommand")}
    cfg = RunConfig(a.subcommand, params, fmt, a.out, a.workers, a.max_entries)
    try:
        if cfg.workers < 1 or cfg.max_entries < 1:
            raise InvalidParameters("--workers and --max-entries must be positive")
        em = Emitter(cfg)
        COMMANDS[a.subcommand](a, cfg, em)
    except InvalidParameters as exc:
        _error("invalid-parameters", str(exc), cfg)
        return 2
    except BudgetExceeded as exc:
        _error("budget-exceeded", str(exc), cfg)
        return 3
    text = em.render()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def _error(kind: str, message: str, cfg: RunConfig):
    sys.stderr.write(_json({"error": kind, "message": message, "config": cfg.echo()}) + "\n")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
