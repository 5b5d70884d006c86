"""Societal state dynamics.

Synchronous interactions give the discrete-time update d+ = d P(pi, d);
asynchronous Poisson-clock interactions give the continuous-time field
dd/dt = delta * (d P(pi, d) - d), integrated here with fixed-step classical
RK4. After every step (and before stage evaluations) distributions and policy
rows are clipped at zero and renormalized; the projection is skipped entirely
when a vector is already valid, so rest points stay bitwise constant. The
correction magnitude is recorded per trajectory and a correction beyond
CORRECTION_HARD aborts the run as too stiff for the step size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, IntegrationError
from .types import GameSpec, Policy, SocialState, StateDistribution

CORRECTION_HARD = 1e-3
_SKIP_TOL = 5e-13    # below this row-sum drift, projection is the identity


@dataclass(frozen=True)
class TrajectoryMeta:
    integrator: str
    step_size: float
    seed: int | None = None
    max_correction: float = 0.0
    max_mass_drift: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed social-state snapshots (step index for discrete runs,
    seconds for continuous ones)."""

    times: np.ndarray
    states: list[SocialState]
    meta: TrajectoryMeta

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if len(times) != len(self.states):
            raise ConfigError("trajectory times and states length mismatch")
        if (np.diff(times) <= 0).any():
            raise ConfigError("trajectory times must be strictly increasing")

    def state_at(self, t: float) -> SocialState:
        idx = int(np.argmin(np.abs(self.times - t)))
        return self.states[idx]

    def distributions(self) -> np.ndarray:
        """(n_snapshots, n_tau, n_x) array of state distributions."""
        return np.stack([s.d.table for s in self.states])

    def policies(self) -> np.ndarray:
        return np.stack([s.pi.table for s in self.states])

    def to_csv_text(self) -> str:
        first = self.states[0]
        n_tau, n_x, n_a = first.pi.table.shape
        header = ["t"]
        header += [f"d_{tau}_{x}" for tau in range(n_tau) for x in range(n_x)]
        header += [f"pi_{tau}_{x}_{a}" for tau in range(n_tau)
                   for x in range(n_x) for a in range(n_a)]
        lines = [",".join(header)]
        for t, s in zip(self.times, self.states):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in s.d.table.ravel()]
            row += [repr(float(v)) for v in s.pi.table.ravel()]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "meta": {
                "integrator": self.meta.integrator,
                "step_size": self.meta.step_size,
                "seed": self.meta.seed,
                "max_correction": self.meta.max_correction,
                "max_mass_drift": self.meta.max_mass_drift,
            },
            "times": [float(t) for t in self.times],
            "states": [
                {"pi": s.pi.table.tolist(), "d": s.d.table.tolist()}
                for s in self.states
            ],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Synchronous model


def sync_step(spec: GameSpec, s: SocialState) -> StateDistribution:
    """One global-clock update d+ = d P(pi, d); stays in D by Lemma-type
    stochasticity of P."""
    p = spec.transition_table(s.pi.table, s.d.table)
    P = np.einsum("txa,txay->txy", s.pi.table, p)
    return StateDistribution(np.einsum("tx,txy->ty", s.d.table, P), spec.g)


def sync_run(spec: GameSpec, s0: SocialState, n_steps: int) -> Trajectory:
    """Iterate the synchronous update, recomputing P from the current social
    state at every step; the policy stays fixed."""
    states = [s0]
    s = s0
    for _ in range(n_steps):
        s = SocialState(s.pi, sync_step(spec, s))
        states.append(s)
    return Trajectory(np.arange(n_steps + 1, dtype=float), states,
                      TrajectoryMeta(integrator="sync", step_size=1.0))


# ---------------------------------------------------------------------------
# Asynchronous model


def async_field(spec: GameSpec, s: SocialState) -> np.ndarray:
    """W[tau] = delta_tau (d_tau P_tau(pi, d) - d_tau); rows sum to zero,
    so the motion stays in the tangent cone of D."""
    return _async_field_raw(spec, s.pi.table, s.d.table)


def _async_field_raw(spec: GameSpec, pi: np.ndarray, d: np.ndarray) -> np.ndarray:
    p = spec.transition_table(pi, d)
    P = np.einsum("txa,txay->txy", pi, p)
    return spec.delta[:, None] * (np.einsum("tx,txy->ty", d, P) - d)


def integrate_async(spec: GameSpec, s0: SocialState, t_end: float,
                    h: float | None = None) -> Trajectory:
    """Fixed-step RK4 for the asynchronous state dynamics at a fixed policy."""

    def fld(pi, d):
        return None, _async_field_raw(spec, pi, d)

    return rk4_integrate(spec, s0, fld, t_end, h,
                         rates=spec.delta, integrator="async")


# ---------------------------------------------------------------------------
# Shared RK4 core (also drives the coupled policy-state dynamics)


def rk4_integrate(spec: GameSpec, s0: SocialState, fld, t_end: float,
                  h: float | None, rates: np.ndarray,
                  integrator: str) -> Trajectory:
    """Classical RK4 with clip-and-renormalize projection.

    `fld(pi, d) -> (dpi | None, dd)` evaluates the joint vector field; a None
    policy component means the policy does not evolve and is passed through
    untouched. Step-size guard: h * max(rates) <= 0.5.
    """
    fastest = float(np.max(rates))
    if h is None:
        h = 0.01 / fastest
    if h <= 0:
        raise ConfigError("step size h must be positive")
    if h * fastest > 0.5 + 1e-12:
        raise ConfigError(
            f"step size {h} too large for fastest rate {fastest} "
            "(need h * rate <= 0.5)")
    if t_end <= 0:
        raise ConfigError("t_end must be positive")

    n_full = int(np.floor(t_end / h + 1e-9))
    rem = t_end - n_full * h
    if rem < 1e-12 * max(1.0, t_end):
        rem = 0.0

    pi = np.array(s0.pi.table)
    d = np.array(s0.d.table)
    mask = spec.action_mask
    g = spec.g
    times = [0.0]
    states = [s0]
    max_corr = 0.0
    max_drift = 0.0
    t = 0.0

    for step in range(n_full + (1 if rem else 0)):
        hh = h if step < n_full else rem
        pi_raw, d_raw = _rk4_step(fld, pi, d, hh, g)

        drift = float(np.max(np.abs(d_raw.sum(axis=1) - g)))
        max_drift = max(max_drift, drift)

        pi_new, corr_pi = _project_rows(pi_raw, 1.0)
        d_new, corr_d = _project_rows(d_raw, g)
        corr = max(corr_pi, corr_d)
        max_corr = max(max_corr, corr)
        if corr > CORRECTION_HARD:
            raise IntegrationError(
                f"projection correction {corr:.3e} at t={t + hh:.6g} exceeds "
                f"{CORRECTION_HARD:g}; the dynamics are too stiff for h={h}")

        pi, d = pi_new, d_new
        t += hh
        times.append(t)
        states.append(SocialState(Policy(pi, mask),
                                  StateDistribution(d, g)))

    return Trajectory(np.array(times), states,
                      TrajectoryMeta(integrator=integrator, step_size=h,
                                     max_correction=max_corr,
                                     max_mass_drift=max_drift))


def _rk4_step(fld, pi, d, h, g):
    def clean(pi_s, d_s):
        pi_c, _ = _project_rows(pi_s, 1.0)
        d_c, _ = _project_rows(d_s, g)
        return pi_c, d_c

    k1p, k1d = fld(pi, d)
    if k1p is None:
        # state-only field: the policy is constant, never touched
        k2d = fld(*clean(pi, d + 0.5 * h * k1d))[1]
        k3d = fld(*clean(pi, d + 0.5 * h * k2d))[1]
        k4d = fld(*clean(pi, d + h * k3d))[1]
        d_raw = d + (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        return pi, d_raw

    k2p, k2d = fld(*clean(pi + 0.5 * h * k1p, d + 0.5 * h * k1d))
    k3p, k3d = fld(*clean(pi + 0.5 * h * k2p, d + 0.5 * h * k2d))
    k4p, k4d = fld(*clean(pi + h * k3p, d + h * k3d))
    pi_raw = pi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    d_raw = d + (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
    return pi_raw, d_raw


def _project_rows(arr: np.ndarray, target) -> tuple[np.ndarray, float]:
    """Clip negatives and rescale rows (last axis) to the target mass.
    Returns the projected array and the sup-norm of the correction; exact
    inputs are returned unchanged, bit for bit."""
    sums = arr.sum(axis=-1)
    needs = (arr < 0).any() or bool(np.max(np.abs(sums - target)) > _SKIP_TOL)
    if not needs:
        return arr, 0.0
    clipped = np.where(arr < 0, 0.0, arr)
    sums = clipped.sum(axis=-1)
    safe = np.where(sums > 0, sums, 1.0)   # guard 0/0 on degenerate rows
    out = clipped * (np.asarray(target) / safe)[..., None]
    return out, float(np.max(np.abs(out - arr)))
