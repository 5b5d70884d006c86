import numpy as np
import pytest

from dynpop import equilibrium, games, mdp, reduction
from dynpop.reduction import (classical_nash_residual, reduce,
                              theorem2_crosscheck)
from dynpop.types import (Policy, SocialState, StateDistribution,
                          random_social_state, uniform_social_state)


@pytest.fixture(scope="module")
def two_by_three():
    """2 types x 3 states, built declaratively for full-mask coverage."""
    rows = []
    rewards = []
    for tau in range(2):
        for x in range(3):
            for a in range(2):
                rows += [
                    {"tau": tau, "x": x, "a": a, "to": (x + 1) % 3,
                     "prob": "0.5"},
                    {"tau": tau, "x": x, "a": a, "to": x, "prob": "0.5"},
                ]
                rewards.append({"tau": tau, "x": x, "a": a,
                                "value": f"d({tau},{x}) + {a}*0.1"})
    import json
    from dynpop.gamefile import parse_game_file
    doc = {"types": 2, "states": 3, "actions": 2,
           "g": [0.4, 0.6], "alpha": [0.5, 0.7], "delta": [1.0, 2.0],
           "transitions": rows, "rewards": rewards}
    return parse_game_file(json.dumps(doc), name="two-by-three")


class TestConstruction:
    def test_population_counting_and_masses(self, two_by_three):
        cg = reduce(two_by_three)
        assert len(cg.populations) == 2 * 3 + 2
        masses = [p.mass for p in cg.populations]
        assert masses == [1.0] * 6 + [0.4, 0.6]
        pi_pops = [p for p in cg.populations if p.key[0] == "pi"]
        d_pops = [p for p in cg.populations if p.key[0] == "d"]
        assert all(p.actions == (0, 1) for p in pi_pops)
        assert all(p.actions == (0, 1, 2) for p in d_pops)

    def test_policy_population_payoffs_are_q_bitwise(self, hdh, rng):
        cg = reduce(hdh)
        s = random_social_state(hdh, rng)
        Q = mdp.q_values(hdh, s)
        payoffs = cg.payoffs(s)
        for pop in cg.populations:
            if pop.key[0] == "pi":
                _, tau, x = pop.key
                np.testing.assert_array_equal(payoffs[pop.key],
                                              Q[tau, x, list(pop.actions)])

    def test_distribution_payoffs_sum_to_zero(self, two_by_three, rng):
        cg = reduce(two_by_three)
        for _ in range(20):
            s = random_social_state(two_by_three, rng)
            payoffs = cg.payoffs(s)
            for pop in cg.populations:
                if pop.key[0] == "d":
                    assert abs(payoffs[pop.key].sum()) < 1e-12


class TestClassicalResidual:
    def test_dominant_population_contributes_zero(self, dominant):
        pi = np.array([[[1.0, 0.0]]])
        s = SocialState(Policy(pi, dominant.action_mask),
                        StateDistribution(np.array([[1.0]]), dominant.g))
        assert classical_nash_residual(reduce(dominant), s) < 1e-12

    def test_stationary_distribution_contributes_zero(self, swap):
        s = uniform_social_state(swap)   # uniform d is stationary for swap
        assert classical_nash_residual(reduce(swap), s) < 1e-12

    def test_residual_small_at_solver_equilibria(self, hdh, swap):
        for spec in (hdh, swap):
            report = equilibrium.solve(spec)
            assert report.converged
            assert classical_nash_residual(reduce(spec), report.state) < 1e-7

    def test_pi_component_matches_dynamic_residual(self, hdh, rng):
        """The policy populations' exploitability is the same scalar as the
        dynamic optimality gap, through two code paths."""
        cg = reduce(hdh)
        for _ in range(50):
            s = random_social_state(hdh, rng)
            payoffs = cg.payoffs(s)
            pi_gap = max(
                float(payoffs[p.key].max()
                      - cg.population_state(s, p.key) @ payoffs[p.key])
                for p in cg.populations if p.key[0] == "pi")
            rp, _ = equilibrium.residuals(hdh, s)
            assert abs(pi_gap - rp) < 1e-10


class TestTheorem2:
    def test_equilibria_agree(self, hdh, swap):
        for spec in (hdh, swap):
            report = equilibrium.solve(spec)
            check = theorem2_crosscheck(spec, report.state, tol=1e-6)
            assert check.agree and check.dynamic_equilibrium

    def test_random_states_agree(self, rng):
        disagreements = 0
        for seed in range(10):
            spec = games.random_game(seed)
            for _ in range(10):
                s = random_social_state(spec, rng)
                check = theorem2_crosscheck(spec, s, tol=1e-6)
                assert check.agree
        assert disagreements == 0

    def test_inner_product_identity_is_exact(self, hdh, rng):
        for _ in range(50):
            s = random_social_state(hdh, rng)
            check = theorem2_crosscheck(hdh, s, tol=1e-6)
            assert check.max_identity_error <= 1e-12

    def test_identity_directly(self, swap):
        # constructed d with dP != d: the deviation sigma' = dP exposes
        # exactly -||dP - d||^2
        d = np.array([[0.9, 0.1]])
        s = SocialState(Policy.uniform(swap.action_mask),
                        StateDistribution(d, swap.g))
        P = mdp.stochastic_matrix(swap, s)[0]
        diff = d[0] @ P - d[0]
        inner = float(diff @ (d[0] - (d[0] @ P)))
        assert inner == -float(diff @ diff)
        assert inner < 0

    def test_report_serialization(self, hdh, rng):
        s = random_social_state(hdh, rng)
        doc = theorem2_crosscheck(hdh, s).to_json_dict()
        assert set(doc) >= {"residual_pi", "residual_d", "classical_residual",
                            "agree"}
