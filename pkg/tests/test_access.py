"""Multi-access power minimization: solvers, oracles, and the rate regions."""

import math

import numpy as np
import pytest

from skyplan.access import (Scheme, UserDemand, brute_force_region_check,
                            compare_schemes, orthogonal_grid_oracle,
                            rsma_brute_force, solve_fdma, solve_rsma,
                            solve_tdma)
from skyplan.errors import ValidationError

from conftest import random_access_instance


class TestRsma:
    def test_single_user_closed_form(self):
        sol = solve_rsma([UserDemand(1.0, 1.0)], bandwidth=1.0, noise_density=1.0)
        assert sol.total_power == pytest.approx(1.0)
        assert sol.powers == (1.0,)
        assert sol.decode_order == (0,)

    def test_two_symmetric_users_sum_constraint_binds(self):
        users = [UserDemand(1.0, 1.0), UserDemand(1.0, 1.0)]
        sol = solve_rsma(users, 1.0, 1.0)
        # individual constraints need 1 W each, the sum constraint needs 3 W total
        assert sol.total_power == pytest.approx(3.0)
        assert sorted(sol.powers) == pytest.approx([1.0, 2.0])

    def test_matches_exhaustive_enumeration(self, rng):
        for _ in range(60):
            users, w, n0 = random_access_instance(rng, int(rng.integers(2, 6)))
            fast = solve_rsma(users, w, n0)
            slow = rsma_brute_force(users, w, n0)
            assert fast.total_power == pytest.approx(slow.total_power, rel=1e-9)

    def test_decode_order_descending_gain(self, rng):
        users, w, n0 = random_access_instance(rng, 5)
        sol = solve_rsma(users, w, n0)
        gains = [users[i].gain for i in sol.decode_order]
        assert gains == sorted(gains, reverse=True)

    def test_empty_users_rejected(self):
        with pytest.raises(ValidationError):
            solve_rsma([], 1.0, 1.0)

    def test_region_constraints_satisfied(self, rng):
        for _ in range(20):
            users, w, n0 = random_access_instance(rng, int(rng.integers(1, 7)))
            sol = solve_rsma(users, w, n0)
            assert brute_force_region_check(sol, users, w, n0)


class TestFdma:
    def test_single_user_takes_all_bandwidth(self):
        user = UserDemand(2.0, 3.0)
        sol = solve_fdma([user], bandwidth=1.0, noise_density=1.0)
        assert sol.shares == (1.0,)
        assert sol.total_power == pytest.approx((2 ** 3 - 1) / 2.0)

    def test_symmetric_pair_splits_evenly(self):
        users = [UserDemand(1.0, 1.0), UserDemand(1.0, 1.0)]
        sol = solve_fdma(users, 1.0, 1.0)
        assert sol.shares[0] == pytest.approx(0.5, abs=1e-9)
        assert sol.shares[1] == pytest.approx(0.5, abs=1e-9)

    def test_asymmetric_pair_matches_grid_search(self):
        users = [UserDemand(1.0, 1.0), UserDemand(4.0, 1.0)]
        sol = solve_fdma(users, 1.0, 1.0)
        oracle = orthogonal_grid_oracle(users, 1.0, 1.0, time_domain=False)
        assert sol.total_power == pytest.approx(oracle, rel=1e-4)

    def test_shares_sum_to_one(self, rng):
        for _ in range(30):
            users, w, n0 = random_access_instance(rng, int(rng.integers(1, 8)))
            sol = solve_fdma(users, w, n0)
            assert math.fsum(sol.shares) == pytest.approx(1.0, abs=1e-9)
            assert brute_force_region_check(sol, users, w, n0)


class TestTdma:
    def test_single_user_equals_fdma(self):
        users = [UserDemand(3.0, 2.0)]
        f = solve_fdma(users, 1.0, 1.0)
        t = solve_tdma(users, 1.0, 1.0)
        assert t.total_power == pytest.approx(f.total_power)

    def test_symmetric_pair_closed_form(self):
        users = [UserDemand(2.0, 1.0), UserDemand(2.0, 1.0)]
        sol = solve_tdma(users, 1.0, 1.0)
        assert sol.shares[0] == pytest.approx(0.5, abs=1e-9)
        # each user: (2^(2R/W) - 1) W n0 / g = 3 / 2
        assert sol.total_power == pytest.approx(3.0, rel=1e-9)

    def test_per_user_power_is_fdma_over_share(self, rng):
        # algebraic identity at any fixed share vector
        users, w, n0 = random_access_instance(rng, 3)
        shares = np.array([0.2, 0.5, 0.3])
        for u, b in zip(users, shares):
            p_fdma = (2 ** (u.rate / (w * b)) - 1) * w * n0 * b / u.gain
            p_tdma = (2 ** (u.rate / (w * b)) - 1) * w * n0 / u.gain
            assert p_tdma == pytest.approx(p_fdma / b, rel=1e-12)
            assert p_tdma >= p_fdma

    def test_region_constraints_satisfied(self, rng):
        for _ in range(20):
            users, w, n0 = random_access_instance(rng, int(rng.integers(1, 8)))
            sol = solve_tdma(users, w, n0)
            assert brute_force_region_check(sol, users, w, n0)


class TestZeroRateUsers:
    @pytest.mark.parametrize("solver", [solve_rsma, solve_fdma, solve_tdma])
    def test_zero_rate_gets_zero_power(self, solver):
        users = [UserDemand(1e-9, 0.0), UserDemand(1e-9, 2e6), UserDemand(1e-8, 0.0)]
        sol = solver(users, 1e6, 1e-17)
        assert sol.powers[0] == 0.0
        assert sol.powers[2] == 0.0
        assert sol.powers[1] > 0.0
        if sol.scheme is not Scheme.RSMA:
            assert sol.shares[0] == 0.0
            assert sol.shares[2] == 0.0
            assert math.fsum(sol.shares) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("solver", [solve_rsma, solve_fdma, solve_tdma])
    def test_all_zero_rates(self, solver):
        users = [UserDemand(1e-9, 0.0), UserDemand(1e-8, 0.0)]
        sol = solver(users, 1e6, 1e-17)
        assert sol.total_power == 0.0
        if sol.scheme is not Scheme.RSMA:
            assert math.fsum(sol.shares) == pytest.approx(1.0, abs=1e-9)
        assert brute_force_region_check(sol, users, 1e6, 1e-17)


class TestRegionCheck:
    def test_valid_solution_passes(self):
        users = [UserDemand(1.0, 1.0), UserDemand(1.0, 1.0)]
        sol = solve_rsma(users, 1.0, 1.0)
        assert brute_force_region_check(sol, users, 1.0, 1.0)

    def test_halved_power_fails(self):
        users = [UserDemand(1.0, 1.0), UserDemand(1.0, 1.0)]
        sol = solve_rsma(users, 1.0, 1.0)
        tampered = type(sol)(
            scheme=sol.scheme,
            powers=(sol.powers[0] / 2, sol.powers[1]),
            shares=sol.shares,
            decode_order=sol.decode_order,
            total_power=sol.powers[0] / 2 + sol.powers[1],
        )
        assert not brute_force_region_check(tampered, users, 1.0, 1.0)

    def test_too_many_users_rejected(self):
        users = [UserDemand(1.0, 0.0) for _ in range(13)]
        sol = solve_rsma(users, 1.0, 1.0)
        with pytest.raises(ValidationError):
            brute_force_region_check(sol, users, 1.0, 1.0)


class TestSchemeOrdering:
    def test_rsma_fdma_tdma_ordering(self, rng):
        for _ in range(100):
            users, w, n0 = random_access_instance(rng, int(rng.integers(1, 7)))
            p_rsma = solve_rsma(users, w, n0).total_power
            p_fdma = solve_fdma(users, w, n0).total_power
            p_tdma = solve_tdma(users, w, n0).total_power
            assert p_rsma <= p_fdma * (1 + 1e-9)
            assert p_fdma <= p_tdma * (1 + 1e-9)

    def test_single_user_all_equal(self):
        users = [UserDemand(3e-9, 1.2e6)]
        rows = compare_schemes(users, 1e6, 1e-17)
        totals = [r.total_power for r in rows]
        assert totals[0] == pytest.approx(totals[1], rel=1e-9)
        assert totals[0] == pytest.approx(totals[2], rel=1e-9)
        assert all(r.pct_saved_by_rsma == pytest.approx(0.0, abs=1e-7) for r in rows)

    def test_comparison_percentages(self, rng):
        users, w, n0 = random_access_instance(rng, 3)
        rows = {r.scheme: r for r in compare_schemes(users, w, n0)}
        p = {s: rows[s].total_power for s in Scheme}
        expect_fdma = 100 * (p[Scheme.FDMA] - p[Scheme.RSMA]) / p[Scheme.FDMA]
        assert rows[Scheme.FDMA].pct_saved_by_rsma == pytest.approx(expect_fdma)
        assert rows[Scheme.RSMA].pct_saved_by_rsma == 0.0


class TestParameterScaling:
    def test_gain_scaling_inverts_powers(self, rng):
        users, w, n0 = random_access_instance(rng, 4)
        c = 37.5
        scaled = [UserDemand(u.gain * c, u.rate) for u in users]
        for solver in (solve_rsma, solve_fdma, solve_tdma):
            base = solver(users, w, n0)
            scal = solver(scaled, w, n0)
            for pb, ps in zip(base.powers, scal.powers):
                if pb > 0:
                    assert ps == pytest.approx(pb / c, rel=1e-9)
            for sb, ss in zip(base.shares, scal.shares):
                assert ss == pytest.approx(sb, abs=1e-9)
            if base.decode_order is not None:
                assert base.decode_order == scal.decode_order

    def test_total_power_monotone_in_bandwidth(self, rng):
        users, _, n0 = random_access_instance(rng, 4)
        grid = np.linspace(2e5, 3e6, 8)
        for solver in (solve_rsma, solve_fdma, solve_tdma):
            totals = [solver(users, float(w), n0).total_power for w in grid]
            for a, b in zip(totals, totals[1:]):
                assert b <= a * (1 + 1e-9)

    def test_total_power_monotone_in_rates(self, rng):
        users, w, n0 = random_access_instance(rng, 3)
        bumped = [UserDemand(u.gain, u.rate * 1.1) for u in users]
        for solver in (solve_rsma, solve_fdma, solve_tdma):
            assert solver(bumped, w, n0).total_power >= \
                solver(users, w, n0).total_power * (1 - 1e-9)
