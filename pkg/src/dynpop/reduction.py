"""Reduction to a classical population game.

Every dynamic game induces a classical population game over its own social
state: each (type, state) pair becomes a unit-mass population playing the
allowed actions with payoffs equal to the single-stage deviation rewards, and
each type becomes a mass-g population whose "actions" are the states and
whose payoff vector is the asynchronous state field delta (dP - d). Nash
equilibria of that game coincide exactly with stationary equilibria of the
dynamic game, which `theorem2_crosscheck` verifies numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import async_field
from .equilibrium import residuals
from .errors import Theorem2Violation
from .mdp import mdp_view
from .types import GameSpec, SocialState


@dataclass(frozen=True)
class Population:
    key: tuple            # ("pi", tau, x) or ("d", tau)
    mass: float
    actions: tuple[int, ...]


@dataclass(frozen=True)
class ClassicalGame:
    spec: GameSpec
    populations: tuple[Population, ...]

    def payoffs(self, s: SocialState) -> dict[tuple, np.ndarray]:
        """Payoff vector per population at the social state chi = (pi, d)."""
        view = mdp_view(self.spec, s)
        W = async_field(self.spec, s)
        out: dict[tuple, np.ndarray] = {}
        for pop in self.populations:
            if pop.key[0] == "pi":
                _, tau, x = pop.key
                out[pop.key] = view.Q[tau, x, list(pop.actions)]
            else:
                out[pop.key] = W[pop.key[1]]
        return out

    def population_state(self, s: SocialState, key: tuple) -> np.ndarray:
        """The slice of (pi, d) that is this population's state."""
        if key[0] == "pi":
            _, tau, x = key
            acts = self.spec.unmasked(tau, x)
            return s.pi.table[tau, x, acts]
        return s.d.table[key[1]]


def reduce(spec: GameSpec) -> ClassicalGame:
    """Construct the classical population game induced by the dynamic game."""
    populations = []
    for tau in range(spec.n_tau):
        for x in range(spec.n_x):
            acts = tuple(int(a) for a in spec.unmasked(tau, x))
            populations.append(Population(("pi", tau, x), 1.0, acts))
    for tau in range(spec.n_tau):
        populations.append(Population(("d", tau), float(spec.g[tau]),
                                      tuple(range(spec.n_x))))
    return ClassicalGame(spec, tuple(populations))


def classical_nash_residual(cg: ClassicalGame, s: SocialState) -> float:
    """Max over populations of the exploitability gap
    m * max_a F[a] - sum_a chi[a] F[a]; zero exactly at Nash equilibria."""
    payoffs = cg.payoffs(s)
    worst = -np.inf
    for pop in cg.populations:
        F = payoffs[pop.key]
        chi = cg.population_state(s, pop.key)
        gap = pop.mass * float(F.max()) - float(np.dot(chi, F))
        worst = max(worst, gap)
    return worst


@dataclass(frozen=True)
class CrosscheckReport:
    residual_pi: float
    residual_d: float
    classical_residual: float
    tol: float
    dynamic_equilibrium: bool
    classical_equilibrium: bool
    max_identity_error: float

    @property
    def agree(self) -> bool:
        return self.dynamic_equilibrium == self.classical_equilibrium

    def to_json_dict(self) -> dict:
        return {
            "residual_pi": self.residual_pi,
            "residual_d": self.residual_d,
            "classical_residual": self.classical_residual,
            "tol": self.tol,
            "dynamic_equilibrium": self.dynamic_equilibrium,
            "classical_equilibrium": self.classical_equilibrium,
            "max_identity_error": self.max_identity_error,
            "agree": self.agree,
        }


def theorem2_crosscheck(spec: GameSpec, s: SocialState,
                        tol: float = 1e-6) -> CrosscheckReport:
    """Check that both equilibrium characterizations agree at s.

    Verdicts must match: (both dynamic residuals < tol) iff (classical Nash
    residual < tol); disagreement raises Theorem2Violation. Also verifies the
    contradiction step behind the equivalence: whenever d P differs from d,
    testing the deviation sigma' = d P exposes a strictly negative inner
    product (dP - d)(d - sigma')^T = -||dP - d||^2, an exact identity."""
    rp, rd = residuals(spec, s)
    cg = reduce(spec)
    cr = classical_nash_residual(cg, s)
    dyn_eq = rp < tol and rd < tol
    cls_eq = cr < tol

    view = mdp_view(spec, s)
    max_err = 0.0
    for tau in range(spec.n_tau):
        d_tau = s.d.table[tau]
        dP = d_tau @ view.P[tau]
        diff = dP - d_tau
        if float(np.max(np.abs(diff))) > tol:
            inner = float(np.dot(diff, d_tau - dP))
            max_err = max(max_err, abs(inner + float(np.dot(diff, diff))))

    report = CrosscheckReport(rp, rd, cr, tol, dyn_eq, cls_eq, max_err)
    if not report.agree:
        raise Theorem2Violation(
            f"dynamic residuals ({rp:.3e}, {rd:.3e}) and classical residual "
            f"{cr:.3e} disagree at tol {tol:g}", (rp, rd), cr)
    return report
