"""Stationary equilibria: residuals, a damped fixed-point solver, and the
policy-iteration optimality certificate.

A social state is a stationary equilibrium when every per-state policy row is
a best response to the single-stage deviation rewards (optimality gap zero)
and every type distribution is stationary under its stochastic matrix. The
solver damps the map s -> (B(s), d P(s)); existence of a fixed point is
guaranteed, attractiveness is not, so non-convergence is reported as a
diagnostic rather than raised.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import run_parallel
from .errors import ConfigError
from .mdp import (MdpView, _policy_iteration_type, best_response_from_q,
                  mdp_view)
from .types import (GameSpec, Policy, SocialState, StateDistribution,
                    random_social_state, uniform_social_state)

DEFAULT_DAMPING = 0.2
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 10_000
STALL_WINDOW = 50


@dataclass(frozen=True)
class Certificate:
    """Outcome of the frozen-state policy-iteration check: at an equilibrium
    no improvement step is possible and the deterministic optimum matches the
    candidate's value per state."""

    passed: bool
    improvement_steps: int
    value_gap: float
    failures: tuple[tuple[int, int, float], ...]   # (tau, x, q_gap)

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "improvement_steps": self.improvement_steps,
            "value_gap": self.value_gap,
            "failures": [
                {"tau": tau, "x": x, "q_gap": gap}
                for tau, x, gap in self.failures
            ],
        }


@dataclass
class EquilibriumReport:
    state: SocialState
    residual_pi: float
    residual_d: float
    iterations: int
    converged: bool
    tol: float
    damping: float
    protocol: str
    logit_temperature: float | None = None
    certificate: Certificate | None = None

    def to_json_dict(self) -> dict:
        out = {
            "schema": 1,
            "residual_pi": self.residual_pi,
            "residual_d": self.residual_d,
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "damping": self.damping,
            "protocol": self.protocol,
            "logit_temperature": self.logit_temperature,
            "pi": self.state.pi.table.tolist(),
            "d": self.state.d.table.tolist(),
            "certificate": (self.certificate.to_json_dict()
                            if self.certificate else None),
        }
        return out


def residuals(spec: GameSpec, s: SocialState) -> tuple[float, float]:
    """(optimality gap, stationarity gap); both within tolerance of zero
    exactly at stationary equilibria."""
    return residuals_from_view(s, mdp_view(spec, s))


def residuals_from_view(s: SocialState, view: MdpView) -> tuple[float, float]:
    top = np.max(view.Q, axis=2)                      # masked slots are -inf
    avg = np.einsum("txa,txa->tx", s.pi.table, view.q_zeroed)
    residual_pi = float(np.max(top - avg))
    flow = np.einsum("tx,txy->ty", s.d.table, view.P) - s.d.table
    residual_d = float(np.max(np.abs(flow)))
    return residual_pi, residual_d


def solve(spec: GameSpec, s0: SocialState | None = None,
          damping: float = DEFAULT_DAMPING, tol: float = DEFAULT_TOL,
          max_iters: int = DEFAULT_MAX_ITERS,
          protocol: str = "best-response",
          logit_temperature: float | None = None,
          tie_tol: float = 1e-10) -> EquilibriumReport:
    """Damped fixed-point iteration s <- (1-damping) s + damping (B(s), dP(s)).

    The policy target B is the canonical tie-broken best response, or its
    logit smoothing when protocol="logit". Stops when both residuals drop
    below tol; returns a non-converged report with diagnostics otherwise.
    """
    if not 0.0 < damping <= 1.0:
        raise ConfigError("damping must lie in (0, 1]")
    if protocol not in ("best-response", "logit"):
        raise ConfigError("policy update protocol must be best-response or logit")
    if protocol == "logit":
        if logit_temperature is None or logit_temperature <= 0:
            raise ConfigError("logit protocol needs a positive temperature")

    s = uniform_social_state(spec) if s0 is None else s0
    lam = damping
    best_seen = np.inf
    since_best = 0
    warned = False

    for it in range(max_iters):
        view = mdp_view(spec, s)
        rp, rd = residuals_from_view(s, view)
        if rp < tol and rd < tol:
            return EquilibriumReport(s, rp, rd, it, True, tol, damping,
                                     protocol, logit_temperature)
        worst = max(rp, rd)
        if worst < best_seen - 1e-15:
            best_seen = worst
            since_best = 0
        else:
            since_best += 1
            if (since_best >= STALL_WINDOW and not warned
                    and protocol == "best-response"):
                warnings.warn(
                    "equilibrium residual has not improved for "
                    f"{STALL_WINDOW} iterations; the best response may be "
                    "oscillating -- consider protocol='logit'",
                    stacklevel=2)
                warned = True

        target_pi = _policy_target(spec, view, protocol, logit_temperature,
                                   tie_tol)
        target_d = np.einsum("tx,txy->ty", s.d.table, view.P)
        pi = (1.0 - lam) * s.pi.table + lam * target_pi
        d = (1.0 - lam) * s.d.table + lam * target_d
        s = SocialState(Policy(pi, spec.action_mask),
                        StateDistribution(d, spec.g))

    rp, rd = residuals(spec, s)
    return EquilibriumReport(s, rp, rd, max_iters, False, tol, damping,
                             protocol, logit_temperature)


def _policy_target(spec, view, protocol, temperature, tie_tol) -> np.ndarray:
    if protocol == "best-response":
        return best_response_from_q(spec.action_mask, view.Q, tie_tol).distribution
    scaled = np.where(spec.action_mask, view.Q, -np.inf) / temperature
    scaled = scaled - scaled.max(axis=2, keepdims=True)
    weights = np.where(spec.action_mask, np.exp(scaled), 0.0)
    return weights / weights.sum(axis=2, keepdims=True)


def solve_many(spec: GameSpec, restarts: int, seed: int = 0,
               **solve_kwargs) -> list[EquilibriumReport]:
    """Run `restarts` solves from seeded random initial states (in parallel,
    capped by DYNPOP_THREADS)."""
    rng = np.random.default_rng(seed)
    starts = [random_social_state(spec, rng) for _ in range(restarts)]
    return run_parallel(lambda s0: solve(spec, s0=s0, **solve_kwargs), starts)


def distinct_equilibria(reports: list[EquilibriumReport],
                        distance_tol: float = 1e-4) -> list[EquilibriumReport]:
    """Converged reports, deduplicated by sup-distance on (pi, d)."""
    kept: list[EquilibriumReport] = []
    for report in reports:
        if not report.converged:
            continue
        if all(_state_distance(report.state, other.state) > distance_tol
               for other in kept):
            kept.append(report)
    return kept


def _state_distance(a: SocialState, b: SocialState) -> float:
    return max(float(np.max(np.abs(a.pi.table - b.pi.table))),
               float(np.max(np.abs(a.d.table - b.d.table))))


def certify(spec: GameSpec, report: EquilibriumReport,
            gap_tol: float = 1e-7, value_tol: float = 1e-6) -> Certificate:
    """Freeze the candidate (pi*, d*) and run policy iteration per type.

    Passes when no improvement step is needed anywhere and the deterministic
    optimum's value matches V(pi*, d*) within value_tol per state. The
    certificate is attached to the report and returned.
    """
    s = report.state
    p = spec.transition_table(s.pi.table, s.d.table)
    r = spec.reward_table(s.pi.table, s.d.table)
    view = mdp_view(spec, s)

    steps_needed = 0
    value_gap = 0.0
    failures: list[tuple[int, int, float]] = []
    gaps = np.max(view.Q, axis=2) - np.einsum(
        "txa,txa->tx", s.pi.table, view.q_zeroed)
    for tau in range(spec.n_tau):
        _, steps, v_opt = _policy_iteration_type(
            p[tau], r[tau], spec.action_mask[tau], float(spec.alpha[tau]),
            s.pi.table[tau], max_iters=1000, improve_tol=gap_tol)
        steps_needed = max(steps_needed, steps)
        value_gap = max(value_gap, float(np.max(np.abs(v_opt - view.V[tau]))))
        for x in range(spec.n_x):
            if gaps[tau, x] > gap_tol:
                failures.append((tau, x, float(gaps[tau, x])))

    cert = Certificate(
        passed=(steps_needed == 0 and value_gap <= value_tol),
        improvement_steps=steps_needed,
        value_gap=value_gap,
        failures=tuple(failures),
    )
    report.certificate = cert
    return cert
