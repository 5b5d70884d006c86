import itertools

import numpy as np
import pytest

from dynpop import equilibrium, evolution, games, mdp, reduction
from dynpop.errors import ConfigError
from dynpop.evolution import (EvolutionConfig, RevisionProtocol, coupled_field,
                              mean_dynamic, nash_stationarity_check,
                              tangent_projection)
from dynpop.types import (Policy, SocialState, StateDistribution,
                          random_social_state, uniform_social_state)

BR = RevisionProtocol.best_response()
PROJ = RevisionProtocol.projection()
REP = RevisionProtocol.replicator()


def oracle_tangent_projection(F, chi, zero_tol=1e-12):
    """Exact projection onto {y : sum y = 0, y_a >= 0 where chi_a = 0} by
    exhaustive enumeration of active sets."""
    n = len(F)
    zero_set = [a for a in range(n) if chi[a] <= zero_tol]
    best, best_dist = None, np.inf
    for k in range(len(zero_set) + 1):
        for active in itertools.combinations(zero_set, k):
            free = [a for a in range(n) if a not in active]
            mu = np.mean([F[a] for a in free])
            y = np.zeros(n)
            for a in free:
                y[a] = F[a] - mu
            if any(y[a] < -1e-12 for a in zero_set if a not in active):
                continue
            dist = float(np.sum((y - F) ** 2))
            if dist < best_dist - 1e-15:
                best, best_dist = y, dist
    return best


class TestMeanDynamic:
    def test_best_response(self):
        H = mean_dynamic(BR, np.array([1.0, 2.0]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(H, [-0.5, 0.5])

    def test_projection_interior_identity(self):
        F = np.array([0.3, -0.1, -0.2])   # already zero-sum
        chi = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(mean_dynamic(PROJ, F, chi), F, atol=1e-15)

    def test_logit_approaches_best_response(self):
        H = mean_dynamic(RevisionProtocol.logit(1e-3),
                         np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        np.testing.assert_allclose(H, [-1.0, 1.0], atol=1e-6)

    def test_replicator_vertex_rest_point(self):
        H = mean_dynamic(REP, np.array([5.0, -1.0]), np.array([1.0, 0.0]))
        np.testing.assert_array_equal(H, [0.0, 0.0])

    def test_replicator_formula(self, rng):
        F = rng.normal(size=4)
        chi = rng.dirichlet(np.ones(4))
        H = mean_dynamic(REP, F, chi)
        np.testing.assert_allclose(H, chi * (F - chi @ F), atol=1e-15)

    def test_zero_sum_across_protocols(self, rng):
        protos = [BR, PROJ, REP, RevisionProtocol.logit(0.3)]
        for _ in range(200):
            n = int(rng.integers(2, 5))
            F = rng.normal(size=n)
            chi = rng.dirichlet(np.ones(n))
            if rng.random() < 0.3:
                chi[rng.integers(n)] = 0.0
                chi /= chi.sum()
            for proto in protos:
                assert abs(mean_dynamic(proto, F, chi).sum()) < 1e-12


class TestTangentProjection:
    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 6))
            F = rng.normal(size=n)
            chi = rng.dirichlet(np.ones(n))
            # push some coordinates onto the boundary
            for a in range(n):
                if rng.random() < 0.4:
                    chi[a] = 0.0
            if chi.sum() == 0:
                chi[0] = 1.0
            chi /= chi.sum()
            got = tangent_projection(F, chi)
            want = oracle_tangent_projection(F, chi)
            np.testing.assert_allclose(got, want, atol=1e-10)

    def test_projection_is_idempotent_direction(self, rng):
        # projecting the projection changes nothing: H is in the cone
        F = rng.normal(size=4)
        chi = np.array([0.0, 0.2, 0.8, 0.0])
        H = tangent_projection(F, chi)
        np.testing.assert_allclose(tangent_projection(H, chi), H, atol=1e-12)


class TestProtocolValidation:
    def test_logit_needs_temperature(self):
        with pytest.raises(ConfigError):
            RevisionProtocol("logit")

    def test_state_weighted_wrappable(self):
        RevisionProtocol.state_weighted(BR)
        RevisionProtocol.state_weighted(RevisionProtocol.logit(0.1))
        RevisionProtocol.state_weighted(REP)
        with pytest.raises(ConfigError):
            RevisionProtocol.state_weighted(PROJ)

    def test_eta_positive(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(np.array([0.0]), (BR,))

    def test_eta_warning_above_delta(self, hdh, uniform_hdh):
        cfg = EvolutionConfig.uniform(1, BR, eta=2.0)   # delta is 1
        with pytest.warns(UserWarning, match="eta exceeds"):
            coupled_field(hdh, uniform_hdh, cfg)


class TestCoupledField:
    def test_vanishes_at_solver_equilibrium(self, hdh):
        report = equilibrium.solve(hdh)
        cfg = EvolutionConfig.uniform(1, BR, eta=0.5)
        dpi, dd = coupled_field(hdh, report.state, cfg)
        assert max(np.abs(dpi).max(), np.abs(dd).max()) < 1e-7

    def test_linear_in_eta(self, hdh, uniform_hdh):
        big = coupled_field(hdh, uniform_hdh,
                            EvolutionConfig.uniform(1, BR, eta=1.0))[0]
        tiny = coupled_field(hdh, uniform_hdh,
                             EvolutionConfig.uniform(1, BR, eta=1e-9))[0]
        np.testing.assert_allclose(tiny, 1e-9 * big, rtol=1e-12)
        assert np.abs(tiny).max() <= 1e-9 * np.abs(big).max() * (1 + 1e-12)

    def test_state_weighted_zero_at_empty_state(self, hdh):
        d = np.array([[0.0, 1.0]])
        s = SocialState(Policy.uniform(hdh.action_mask),
                        StateDistribution(d, hdh.g))
        proto = RevisionProtocol.state_weighted(BR)
        dpi, _ = coupled_field(hdh, s, EvolutionConfig.uniform(1, proto))
        np.testing.assert_array_equal(dpi[0, 0], [0.0, 0.0])
        assert np.abs(dpi[0, 1]).max() > 0

    def test_zero_mass_type_rejected(self):
        spec = games.singleton([["1", "0"], ["0", "1"]], g=[1.0, 0.0])
        with pytest.raises(ConfigError, match="zero mass"):
            coupled_field(spec, uniform_social_state(spec),
                          EvolutionConfig.uniform(2, BR))

    def test_fields_sum_to_zero(self, rng):
        for seed in range(10):
            spec = games.random_game(seed)
            s = random_social_state(spec, rng)
            cfg = EvolutionConfig.uniform(spec.n_tau, BR,
                                          eta=float(spec.delta.min()))
            dpi, dd = coupled_field(spec, s, cfg)
            assert np.abs(dpi.sum(axis=2)).max() < 1e-12
            assert np.abs(dd.sum(axis=1)).max() < 1e-12


class TestReductionEquivalence:
    def test_coupled_field_matches_classical_mean_dynamics(self, hdh, rng):
        """The coupled dynamics are exactly the classical mean dynamics of the
        reduced game: rate-eta protocol dynamics for the policy populations,
        unit-rate projection for the distribution populations."""
        cg = reduction.reduce(hdh)
        cfg = EvolutionConfig.uniform(1, BR, eta=0.7)
        for _ in range(100):
            s = random_social_state(hdh, rng)
            dpi, dd = coupled_field(hdh, s, cfg)
            payoffs = cg.payoffs(s)
            for pop in cg.populations:
                chi = cg.population_state(s, pop.key)
                if pop.key[0] == "pi":
                    _, tau, x = pop.key
                    H = mean_dynamic(cfg.protocols[tau], payoffs[pop.key], chi)
                    np.testing.assert_allclose(
                        cfg.eta[tau] * H, dpi[tau, x, list(pop.actions)],
                        atol=1e-12)
                else:
                    H = mean_dynamic(PROJ, payoffs[pop.key], chi)
                    np.testing.assert_allclose(H, dd[pop.key[1]], atol=1e-12)


class TestNashStationarity:
    def test_solver_equilibrium_is_rest_and_nash(self, hdh):
        report = equilibrium.solve(hdh)
        cfg = EvolutionConfig.uniform(1, BR, eta=0.5)
        assert nash_stationarity_check(hdh, report.state, cfg, tol=1e-6) \
            == (True, True)

    def test_uniform_state_neither(self, hdh, uniform_hdh):
        cfg = EvolutionConfig.uniform(1, BR, eta=0.5)
        assert nash_stationarity_check(hdh, uniform_hdh, cfg, tol=1e-6) \
            == (False, False)

    def test_replicator_vertex_rest_but_not_nash(self, hdh):
        # everyone plays dove; the stationary distribution under all-dove
        # is uniform, so the whole coupled replicator field vanishes, yet
        # dove is strictly dominated there
        pi = np.zeros((1, 2, 2))
        pi[:, :, 1] = 1.0
        s = SocialState(Policy(pi, hdh.action_mask),
                        StateDistribution(np.array([[0.5, 0.5]]), hdh.g))
        cfg = EvolutionConfig.uniform(1, REP, eta=0.5)
        with pytest.warns(UserWarning, match="Nash stationarity"):
            rest, nash = nash_stationarity_check(hdh, s, cfg, tol=1e-6)
        assert rest and not nash


class TestLogitConsistency:
    def test_rest_point_residual_decreases_with_temperature(self, singleton_hd):
        residuals = []
        s0 = uniform_social_state(singleton_hd)
        for temp in (1.0, 0.1, 0.01):
            proto = RevisionProtocol.logit(temp)
            cfg = EvolutionConfig.uniform(1, proto, eta=1.0)
            traj = evolution.integrate_coupled(singleton_hd, s0, cfg,
                                               t_end=25.0, h=0.02)
            rp, rd = equilibrium.residuals(singleton_hd, traj.states[-1])
            residuals.append(max(rp, rd))
        assert residuals[0] > residuals[1] > residuals[2]
        assert residuals[2] < 0.01
