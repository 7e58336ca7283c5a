import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import MAP_PAIRS, maps
from discfrac.diocount import (
    UNBOUNDED,
    KeyPacker,
    PairReduction,
    Target,
    box_solution_count,
    count_table,
    count_table_naive,
    dio_count_naive,
    dio_count_shell,
    fixed_n_maximum,
    growth_profile,
    lemp_check,
    pair_count_hyperbolic,
    pair_count_paraboloid,
    pair_maximum,
    reduction_invariant,
    shell_surface,
    surface_count_table,
    surface_symmetries,
    verify_pair_reduction,
)
from discfrac.lattice import BudgetExceeded, DyadicShell, NormMap, SurfaceMap
from discfrac.repcount import divisor_stats

PARA = SurfaceMap("euclidean-square", 2)
HYPG = SurfaceMap("hyperbolic-quadratic", 2)
EU = NormMap("euclidean", 2)
HY = NormMap("hyperbolic", 2)


def policy_max(table, gamma, policy):
    best = 0
    for key, c in table.as_dict().items():
        N = reduction_invariant(gamma, key[:-1], key[-1])
        if policy == "nondegenerate-only" and N == 0:
            continue
        if policy == "degenerate-only" and N != 0:
            continue
        best = max(best, c)
    return best


class TestExamples:
    def test_dio_count_shell(self):
        assert dio_count_shell(PARA, EU, 2, 0, Target((0, 0), 2)) == 4
        assert dio_count_shell(PARA, EU, 2, 0, Target((0, 0), 5)) == 0
        assert dio_count_shell(HYPG, EU, 2, 2, Target((0, 0), 0)) == 12
        assert dio_count_naive(HYPG, EU, 2, 2, Target((0, 0), 0)) == 12

    def test_paraboloid_pairs(self):
        assert pair_count_paraboloid((0, 0), 2, DyadicShell(0, EU)) == 4
        assert pair_count_paraboloid((1, 1), 1) == 0
        assert pair_count_paraboloid((2, 0), 2, DyadicShell(0, EU)) == 1
        assert pair_count_paraboloid((0, 0), -1) == 0

    def test_hyperbolic_pairs(self):
        assert pair_count_hyperbolic((0, 0), 1) == 0
        assert pair_count_hyperbolic((0, 0), 2, DyadicShell(0, EU)) == 2
        assert pair_count_hyperbolic((0, 0), 0) is UNBOUNDED
        assert pair_count_hyperbolic((0, 0), 0, DyadicShell(2, EU)) == 12

    def test_unbounded_is_not_a_number(self):
        with pytest.raises(ValueError):
            int(UNBOUNDED)
        with pytest.raises(ValueError):
            float(UNBOUNDED)
        assert repr(UNBOUNDED) == "UNBOUNDED"

    def test_box_counts(self):
        assert box_solution_count(PARA, 2, Target((0, 0), 2), 1) == 4
        assert box_solution_count(PARA, 2, Target((0, 0), 0), 0) == 1
        assert box_solution_count(PARA, 2, Target((0, 0), -3), 0) == 0
        assert box_solution_count(SurfaceMap("pure-power", 1, 2), 3, Target((3,), 3), 2) == 1

    def test_lemp(self):
        assert lemp_check(2, 1) and lemp_check(5, 4)
        with pytest.raises(ValueError):
            lemp_check(3, -3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            dio_count_shell(PARA, EU, 1, 0, Target((0, 0), 1))
        with pytest.raises(ValueError):
            dio_count_shell(PARA, EU, 2, 0, Target((0,), 1))
        with pytest.raises(ValueError):
            reduction_invariant(SurfaceMap("pure-power", 1, 3), (1,), 1)


class TestTables:
    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    @pytest.mark.parametrize("s", [2, 3])
    def test_join_matches_naive(self, gk, tk, s):
        g, tau = maps(gk, tk)
        for j in range(3 if s == 2 else 2):
            assert count_table(g, tau, s, j, method="join").as_dict() == count_table_naive(g, tau, s, j).as_dict()

    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    def test_fft_matches_join(self, gk, tk):
        g, tau = maps(gk, tk)
        # hyperbolic shells are sparse in a wide box; the dense grid fits only at j <= 1
        for j in range(3 if tk == "euclidean" else 2):
            fft = count_table(g, tau, 3, j, method="fft").as_dict()
            assert fft == count_table(g, tau, 3, j, method="join").as_dict()

    def test_probe_matches_loop_oracle(self):
        for g, tau in ((PARA, EU), (HYPG, HY)):
            tab = count_table(g, tau, 3, 0)
            for key in list(tab.as_dict())[::7]:
                t = Target(key[:-1], key[-1])
                assert dio_count_shell(g, tau, 3, 0, t) == dio_count_naive(g, tau, 3, 0, t) == tab[t]

    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    def test_totals_and_feasibility(self, gk, tk):
        g, tau = maps(gk, tk)
        for s, j in ((2, 2), (3, 1)):
            ps = shell_surface(g, tau, j)
            tab = count_table(g, tau, s, j)
            assert tab.total() == len(ps) ** s
            T = tab.targets()
            assert np.abs(T[:, :-1]).max() <= s * ps.coordinate_bound()
            assert np.abs(T[:, -1]).max() <= s * ps.gamma_bound()

    def test_unreachable_targets(self):
        # outside the feasibility box the probe answers zero without a table lookup
        assert dio_count_shell(PARA, EU, 2, 1, Target((100, 0), 5)) == 0
        assert dio_count_shell(PARA, EU, 3, 1, Target((0, 0), 10**6)) == 0

    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    def test_monotone_in_s(self, gk, tk):
        g, tau = maps(gk, tk)
        for j in range(3):
            maxima = [count_table(g, tau, s, j).max_entry()[0] for s in (2, 3)]
            assert maxima[0] <= maxima[1]
        if tk == "euclidean":
            assert count_table(g, tau, 2, 3).max_entry()[0] <= count_table(g, tau, 3, 3).max_entry()[0]

    def test_injection_argument(self):
        # appending a fixed shell point m maps D_{s-1}(n, t) into D_s(n + m, t + gamma(m))
        ps = shell_surface(PARA, EU, 1)
        t2, t3 = count_table(PARA, EU, 2, 1), count_table(PARA, EU, 3, 1)
        m, gm = ps.points[0], int(ps.gvals[0])
        for key, c in t2.as_dict().items():
            assert t3[Target(tuple(int(a + b) for a, b in zip(key[:-1], m)), key[-1] + gm)] >= c

    def test_budget_guard(self):
        with pytest.raises(BudgetExceeded):
            count_table(PARA, EU, 3, 4, method="join", max_entries=10**4)
        with pytest.raises(BudgetExceeded):
            count_table(PARA, EU, 3, 4, method="fft", max_entries=10**4)
        with pytest.raises(BudgetExceeded):
            count_table_naive(PARA, EU, 3, 4, max_entries=10**4)

    def test_pure_power_tables(self):
        g, tau = SurfaceMap("pure-power", 1, 3), NormMap("euclidean", 1)
        for j in range(4):
            for s in (2, 3):
                assert count_table(g, tau, s, j).as_dict() == count_table_naive(g, tau, s, j).as_dict()


trip = st.tuples(st.integers(-50, 50), st.integers(-50, 50), st.integers(-5000, 5000))


@given(st.lists(st.tuples(trip, trip), min_size=1, max_size=4))
def test_packer_is_linear(pairs):
    packer = KeyPacker([200, 200, 20000])
    A = np.array([a for a, _ in pairs])
    B = np.array([b for _, b in pairs])
    assert np.array_equal(packer.pack(A) + packer.pack(B), packer.pack(A + B))
    assert np.array_equal(packer.unpack(packer.pack(A)), A)


class TestReduction:
    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    def test_reduction_matches_table(self, gk, tk):
        g, tau = maps(gk, tk)
        for j in range(3):
            rep = verify_pair_reduction(g, tau, j)
            assert rep.ok, rep.examples

    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    def test_scalar_matches_batch(self, gk, tk):
        g, tau = maps(gk, tk)
        shell = DyadicShell(1, tau)
        counter = pair_count_paraboloid if gk == "euclidean-square" else pair_count_hyperbolic
        tab = count_table(g, tau, 2, 1)
        T = tab.targets()
        batch = counter(T[:, :-1], T[:, -1], shell)
        assert np.array_equal(batch, tab.counts)
        for row in T[::5]:
            assert counter(tuple(row[:-1]), int(row[-1]), shell) == tab[Target(tuple(row[:-1]), int(row[-1]))]

    def test_infeasible_targets_count_zero(self):
        red = PairReduction(PARA, EU, 1)
        rows = np.array([[0, 0, 3], [1, 0, 1], [50, 50, 10], [0, 0, -2]])
        want = [count_table(PARA, EU, 2, 1)[Target(tuple(r[:-1]), int(r[-1]))] for r in rows]
        assert red.counts(rows).tolist() == want

    @pytest.mark.parametrize("tk", ["euclidean", "hyperbolic"])
    def test_divisor_bound(self, tk):
        tau = NormMap(tk, 2)
        for j in range(3):
            for key, c in count_table(HYPG, tau, 2, j).as_dict().items():
                N = reduction_invariant(HYPG, key[:-1], key[-1])
                if N:
                    assert c <= 4 * divisor_stats(abs(N)).d

    @given(st.integers(-30, 30), st.integers(-30, 30), st.integers(-400, 400))
    def test_unrestricted_hyperbolic_by_brute(self, n1, n2, t):
        N = 2 * t - (n1 * n1 - n2 * n2)
        got = pair_count_hyperbolic((n1, n2), t)
        if N == 0:
            assert got is UNBOUNDED
            return
        # every solution has |X_i| <= |N|, so x lies in a finite box
        R = abs(N) + abs(n1) + abs(n2)
        brute = 0
        for X1 in range(-R, R + 1):
            for X2 in range(-R, R + 1):
                if X1 * X1 - X2 * X2 == N and (X1 - n1) % 2 == 0 and (X2 - n2) % 2 == 0:
                    brute += 1
        assert got == brute

    @given(st.lists(st.integers(-6, 6), min_size=2, max_size=2), st.integers(0, 80))
    def test_unrestricted_paraboloid_by_brute(self, n, t):
        R = 10
        brute = sum(1 for x in itertools.product(range(-R, R + 1), repeat=2)
                    if (x[0] - n[0]) ** 2 + (x[1] - n[1]) ** 2 + x[0] ** 2 + x[1] ** 2 == t)
        assert pair_count_paraboloid(tuple(n), t) == brute


@given(st.integers(-200, 200), st.integers(-200, 200))
def test_lemp_random(x1, x2):
    if abs(x1) != abs(x2):
        assert lemp_check(x1, x2)


def test_lemp_exhaustive():
    x = np.arange(-200, 201)
    a, b = np.meshgrid(x, x)
    ok = np.abs(a) != np.abs(b)
    assert np.all((a * a + b * b <= (a * a - b * b) ** 2)[ok])


@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-10, 30), st.integers(0, 3))
def test_box_count_monotone(n1, n2, t, R):
    tgt = Target((n1, n2), t)
    for g in (PARA, HYPG):
        assert box_solution_count(g, 2, tgt, R) <= box_solution_count(g, 2, tgt, R + 1)


def test_box_count_matches_loops():
    for g in (PARA, HYPG):
        for tgt in (Target((0, 0), 2), Target((1, 1), 3), Target((2, -1), 1)):
            R = 2
            brute = sum(
                1 for x in itertools.product(range(-R, R + 1), repeat=2)
                for y in itertools.product(range(-R, R + 1), repeat=2)
                if x[0] + y[0] == tgt.n[0] and x[1] + y[1] == tgt.n[1]
                and int(g.values(np.array([x]))[0] + g.values(np.array([y]))[0]) == tgt.t
            )
            assert box_solution_count(g, 2, tgt, R) == brute


class TestProfiles:
    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    @pytest.mark.parametrize("policy", ["all-feasible", "nondegenerate-only", "degenerate-only"])
    def test_pair_maximum_matches_table(self, gk, tk, policy):
        g, tau = maps(gk, tk)
        for j in range(3):
            ps = shell_surface(g, tau, j)
            M, tgt = pair_maximum(ps, policy)
            tab = count_table(g, tau, 2, j)
            assert M == policy_max(tab, g, policy)
            if M:
                assert tab[tgt] == M

    def test_paraboloid_profile_values(self):
        prof = growth_profile(PARA, EU, 2, 4)
        assert [r.M for r in prof.rows] == [4, 8, 16, 24, 32]
        assert prof.all_exact
        assert growth_profile(PARA, EU, 2, 3, "degenerate-only").rows[-1].M == 1

    def test_hyperbolic_degenerate_profile(self):
        prof = growth_profile(HYPG, EU, 2, 4, "degenerate-only")
        assert [r.M for r in prof.rows] == [4, 4, 12, 24, 44]
        assert all(reduction_invariant(HYPG, r.target.n, r.target.t) == 0 for r in prof.rows)

    def test_s3_small_rows(self):
        prof = growth_profile(PARA, EU, 3, 3)
        assert [r.M for r in prof.rows] == [count_table(PARA, EU, 3, j).max_entry()[0] for j in range(4)]
        assert prof.slope is not None

    def test_slope_needs_three_rows(self):
        prof = growth_profile(PARA, EU, 2, 1)
        assert prof.slope is None
        prof = growth_profile(PARA, EU, 2, 4, window=(2, 4))
        assert [r.j for r in prof.fit_rows()] == [2, 3, 4]
        assert prof.summary()["window"] == [2, 4]

    def test_policy_checks(self):
        with pytest.raises(ValueError):
            growth_profile(PARA, EU, 3, 2, "nondegenerate-only")
        with pytest.raises(ValueError):
            growth_profile(PARA, EU, 2, 2, "sampled")

    def test_lower_bound_rows(self):
        prof = growth_profile(PARA, EU, 3, 3, j_min=3, max_entries=10**5)
        row = prof.rows[0]
        assert not row.exact and row.method == "candidate-n"
        assert row.M <= count_table(PARA, EU, 3, 3).max_entry()[0]
        assert count_table(PARA, EU, 3, 3)[row.target] == row.M
        with pytest.raises(BudgetExceeded):
            growth_profile(PARA, EU, 3, 3, j_min=3, max_entries=10**5, allow_lower_bounds=False)


class TestSymmetry:
    def test_group_sizes(self):
        assert len(surface_symmetries(shell_surface(PARA, EU, 2))) == 8
        assert len(surface_symmetries(shell_surface(PARA, HY, 2))) == 8
        assert len(surface_symmetries(shell_surface(HYPG, EU, 2))) == 4

    @pytest.mark.parametrize("gk,tk", MAP_PAIRS)
    def test_fixed_n_maximum(self, gk, tk):
        g, tau = maps(gk, tk)
        for j in (1, 2) if tk == "euclidean" else (1,):
            tab = count_table(g, tau, 3, j).as_dict()
            for n in [(0, 0), (1, 0), (2, 2), (3, -1), (0, 4), (-5, -5)]:
                best = max([c for key, c in tab.items() if key[:2] == n], default=0)
                M, t = fixed_n_maximum(shell_surface(g, tau, j), n)
                assert M == best
                if best:
                    assert tab[n + (t,)] == best
