import dataclasses

import numpy as np
import pytest

from dynpop import equilibrium, games, mdp
from dynpop.equilibrium import (certify, distinct_equilibria, residuals,
                                solve, solve_many)
from dynpop.errors import ConfigError
from dynpop.types import (Policy, SocialState, StateDistribution,
                          uniform_social_state)
from conftest import make_singleton_fixed


def point_policy_state(spec, actions, d=None):
    pi = np.zeros((spec.n_tau, spec.n_x, spec.n_a))
    for tau in range(spec.n_tau):
        for x in range(spec.n_x):
            pi[tau, x, actions[tau][x]] = 1.0
    if d is None:
        d = StateDistribution.uniform(spec.g, spec.n_x)
    return SocialState(Policy(pi, spec.action_mask), d)


def oracle_static_hawk_dove_equilibrium(value, cost, grid=2_000_001):
    """Grid search for the exploitability-minimizing hawk share."""
    y = np.linspace(0.0, 1.0, grid)
    f_hawk = y * (value - cost) / 2.0 + (1.0 - y) * value
    f_dove = (1.0 - y) * value / 2.0
    exploit = np.maximum(f_hawk, f_dove) - (y * f_hawk + (1.0 - y) * f_dove)
    return float(y[np.argmin(exploit)])


class TestResiduals:
    def test_zero_at_dominant_point(self, dominant):
        s = point_policy_state(dominant, [[0]])
        rp, rd = residuals(dominant, s)
        assert rp == pytest.approx(0.0, abs=1e-12)
        assert rd == pytest.approx(0.0, abs=1e-12)

    def test_half_gap_under_uniform(self):
        spec = make_singleton_fixed([0.0, 1.0])
        rp, _ = residuals(spec, uniform_social_state(spec))
        assert rp == pytest.approx(0.5, abs=1e-12)

    def test_swap_vertex_distribution_gap(self, swap):
        d = StateDistribution(np.array([[1.0, 0.0]]), swap.g)
        s = SocialState(Policy.uniform(swap.action_mask), d)
        _, rd = residuals(swap, s)
        assert rd == pytest.approx(1.0, abs=1e-15)

    def test_nonnegative_everywhere(self, hdh, rng):
        from dynpop.types import random_social_state
        for _ in range(50):
            rp, rd = residuals(hdh, random_social_state(hdh, rng))
            assert rp >= -1e-12 and rd >= 0


class TestSolve:
    def test_dominant_converges_fast_undamped(self, dominant):
        report = solve(dominant, damping=1.0)
        assert report.converged and report.iterations <= 2
        np.testing.assert_allclose(report.state.pi.table, [[[1.0, 0.0]]],
                                   atol=1e-12)

    def test_singleton_hawk_dove_mixed_share(self, singleton_hd):
        oracle = oracle_static_hawk_dove_equilibrium(2.0, 3.0)
        assert oracle == pytest.approx(2.0 / 3.0, abs=1e-6)
        report = solve(singleton_hd, damping=0.2, tol=1e-3,
                       protocol="logit", logit_temperature=1e-3)
        assert report.converged
        assert report.state.pi.table[0, 0, 0] == pytest.approx(oracle, abs=1e-3)

    def test_periodic_swap_unique_stationary(self, swap):
        report = solve(swap)
        assert report.converged
        np.testing.assert_allclose(report.state.d.table, [[0.5, 0.5]],
                                   atol=1e-8)

    def test_hawk_dove_hunger_strict_equilibrium(self, hdh):
        report = solve(hdh)
        assert report.converged
        # hungry agents fight, sated agents yield, half the flock is sated
        assert report.state.pi.table[0, 1, 0] > 0.999   # hungry -> hawk
        assert report.state.pi.table[0, 0, 1] > 0.999   # sated -> dove
        np.testing.assert_allclose(report.state.d.table, [[0.5, 0.5]],
                                   atol=1e-6)

    def test_non_convergence_is_diagnostic_not_error(self, singleton_hd):
        with pytest.warns(UserWarning, match="logit"):
            report = solve(singleton_hd, max_iters=300)
        assert not report.converged
        assert report.iterations == 300
        assert report.residual_pi > 0
        # the returned state is still a valid social state
        assert abs(report.state.pi.table[0, 0].sum() - 1.0) < 1e-12

    def test_parameter_validation(self, dominant):
        with pytest.raises(ConfigError):
            solve(dominant, damping=0.0)
        with pytest.raises(ConfigError):
            solve(dominant, protocol="logit")   # temperature missing
        with pytest.raises(ConfigError):
            solve(dominant, protocol="annealing")


class TestRestartsAndDedup:
    def test_restarts_find_equilibrium(self, hdh):
        reports = solve_many(hdh, restarts=4, seed=0)
        assert len(reports) == 4
        assert all(r.converged for r in reports)
        distinct = distinct_equilibria(reports)
        assert len(distinct) == 1   # strict equilibrium, unique attractor

    def test_distinct_keeps_separated_states(self, dominant):
        a = solve(dominant)
        b = solve(dominant)
        assert len(distinct_equilibria([a, b])) == 1


class TestCertify:
    def test_builtin_equilibria_certify(self, hdh, swap):
        for spec in (hdh, swap):
            report = solve(spec)
            cert = certify(spec, report)
            assert cert.passed and cert.improvement_steps == 0
            assert cert.value_gap < 1e-6
            assert report.certificate is cert

    def test_perturbation_fails_with_positive_gap(self, hdh):
        report = solve(hdh)
        pi = np.array(report.state.pi.table)
        # move 5% of the sated row onto hawk, the suboptimal action there
        pi[0, 0] = pi[0, 0] + np.array([0.05, -0.05])
        bad = dataclasses.replace(
            report, state=SocialState(Policy(pi, hdh.action_mask),
                                      report.state.d))
        cert = certify(hdh, bad)
        assert not cert.passed
        assert cert.improvement_steps >= 1
        assert cert.failures and cert.failures[0][2] > 0
        assert cert.failures[0][:2] == (0, 0)

    def test_alpha_zero_reduces_to_stage_optimality(self):
        spec = make_singleton_fixed([2.0, 1.0])   # alpha defaults to 0
        good = solve(spec)
        assert certify(spec, good).passed
        pi = np.array([[[0.9, 0.1]]])
        bad = dataclasses.replace(
            good, state=SocialState(Policy(pi, spec.action_mask),
                                    good.state.d))
        cert = certify(spec, bad)
        assert not cert.passed
        assert cert.failures[0][2] == pytest.approx(0.1, abs=1e-12)

    def test_residual_soundness(self, hdh):
        report = solve(hdh, tol=1e-10)
        if report.converged:
            assert certify(hdh, report).passed


class TestReportSerialization:
    def test_json_dict_schema(self, swap):
        report = solve(swap)
        certify(swap, report)
        doc = report.to_json_dict()
        assert doc["schema"] == 1
        assert doc["converged"] is True
        assert doc["certificate"]["passed"] is True
        assert doc["d"] == report.state.d.table.tolist()
