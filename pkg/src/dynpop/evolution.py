"""Revision protocols, mean dynamics, and coupled policy-state dynamics.

The policy of every type evolves by a mean dynamic H applied to the
single-stage deviation rewards, row by row:

    dpi[.|x]/dt = eta * H(Q[x, .](pi, d), pi[.|x])

while the distribution follows the asynchronous state field. The
state-weighted wrapper replaces the plain rate eta with
delta * eta * d[x] / g, the decentralized-revision scaling in which only
agents currently in state x revise their entry for x and eta is the
probability of revising at an interaction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, _async_field_raw, rk4_integrate
from .errors import ConfigError
from .mdp import TIE_TOL, _view_tables
from .types import GameSpec, SocialState

_NS_PROTOCOLS = ("best-response", "projection")
_WRAPPABLE = ("best-response", "logit", "replicator")


@dataclass(frozen=True)
class RevisionProtocol:
    kind: str
    temperature: float | None = None
    inner: "RevisionProtocol | None" = None

    def __post_init__(self):
        if self.kind == "logit":
            if self.temperature is None or self.temperature <= 0:
                raise ConfigError("logit protocol needs temperature > 0")
        elif self.kind == "state-weighted":
            if self.inner is None or self.inner.kind not in _WRAPPABLE:
                raise ConfigError(
                    "state-weighted wrapper needs an inner protocol in "
                    f"{_WRAPPABLE}")
        elif self.kind not in ("best-response", "projection", "replicator"):
            raise ConfigError(f"unknown revision protocol {self.kind!r}")

    @classmethod
    def best_response(cls) -> "RevisionProtocol":
        return cls("best-response")

    @classmethod
    def logit(cls, temperature: float) -> "RevisionProtocol":
        return cls("logit", temperature=temperature)

    @classmethod
    def projection(cls) -> "RevisionProtocol":
        return cls("projection")

    @classmethod
    def replicator(cls) -> "RevisionProtocol":
        return cls("replicator")

    @classmethod
    def state_weighted(cls, inner: "RevisionProtocol") -> "RevisionProtocol":
        return cls("state-weighted", inner=inner)

    @property
    def state_weighted_flag(self) -> bool:
        return self.kind == "state-weighted"

    @property
    def base(self) -> "RevisionProtocol":
        return self.inner if self.kind == "state-weighted" else self


@dataclass(frozen=True)
class EvolutionConfig:
    eta: np.ndarray                       # per-type revision rate
    protocols: tuple[RevisionProtocol, ...]
    state_model: str = "async"

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        if (eta <= 0).any():
            raise ConfigError("revision rates eta must be positive")
        if len(self.protocols) != eta.shape[0]:
            raise ConfigError("need one protocol per type")
        if self.state_model != "async":
            raise ConfigError("only the async state model is supported")

    @classmethod
    def uniform(cls, n_tau: int, protocol: RevisionProtocol,
                eta: float = 1.0) -> "EvolutionConfig":
        return cls(np.full(n_tau, float(eta)), (protocol,) * n_tau)


def mean_dynamic(protocol: RevisionProtocol, payoffs: np.ndarray,
                 chi: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Expected motion H of the distribution chi under the protocol, given
    the payoff vector. Always sums to zero."""
    protocol = protocol.base
    if protocol.kind == "best-response":
        members = payoffs >= payoffs.max() - tie_tol
        return members / members.sum() - chi
    if protocol.kind == "logit":
        z = np.exp((payoffs - payoffs.max()) / protocol.temperature)
        return z / z.sum() - chi
    if protocol.kind == "projection":
        return tangent_projection(payoffs, chi)
    # replicator: grow shares with above-average payoff
    return chi * (payoffs - float(np.dot(chi, payoffs)))


def tangent_projection(payoffs: np.ndarray, chi: np.ndarray,
                       zero_tol: float = 1e-12) -> np.ndarray:
    """Euclidean projection of the payoff vector onto the tangent cone of the
    simplex at chi, by finite active-set descent: repeatedly zero out
    coordinates that sit on the boundary and whose centered payoff points
    outward, re-centering over the rest."""
    active = np.ones(payoffs.shape, dtype=bool)
    boundary = chi <= zero_tol
    while True:
        mu = payoffs[active].mean()
        H = np.where(active, payoffs - mu, 0.0)
        drop = active & boundary & (H < 0)
        if not drop.any():
            return H
        active &= ~drop


def coupled_field(spec: GameSpec, s: SocialState,
                  cfg: EvolutionConfig) -> tuple[np.ndarray, np.ndarray]:
    """(policy field, state field) of the coupled evolutionary dynamics."""
    _check_rates(spec, cfg)
    return _coupled_field_raw(spec, s.pi.table, s.d.table, cfg)


def _check_rates(spec: GameSpec, cfg: EvolutionConfig) -> None:
    if (spec.g <= 0).any():
        raise ConfigError("types with zero mass cannot be revised")
    if (cfg.eta > spec.delta).any():
        warnings.warn(
            "revision rate eta exceeds interaction rate delta for some type;"
            " revisions are usually no faster than interactions",
            stacklevel=3)


def _coupled_field_raw(spec: GameSpec, pi: np.ndarray, d: np.ndarray,
                       cfg: EvolutionConfig) -> tuple[np.ndarray, np.ndarray]:
    p = spec.transition_table(pi, d)
    r = spec.reward_table(pi, d)
    view = _view_tables(spec, p, r, pi)
    dd = spec.delta[:, None] * (np.einsum("tx,txy->ty", d, view.P) - d)

    dpi = np.zeros_like(pi)
    for tau in range(spec.n_tau):
        proto = cfg.protocols[tau]
        for x in range(spec.n_x):
            acts = spec.unmasked(tau, x)
            H = mean_dynamic(proto, view.Q[tau, x, acts], pi[tau, x, acts])
            if proto.state_weighted_flag:
                rate = (spec.delta[tau] * cfg.eta[tau]
                        * d[tau, x] / spec.g[tau])
            else:
                rate = cfg.eta[tau]
            dpi[tau, x, acts] = rate * H
    return dpi, dd


def integrate_coupled(spec: GameSpec, s0: SocialState, cfg: EvolutionConfig,
                      t_end: float, h: float | None = None) -> Trajectory:
    """Integrate the coupled policy-state system with the shared RK4 core."""
    _check_rates(spec, cfg)

    def fld(pi, d):
        return _coupled_field_raw(spec, pi, d, cfg)

    rates = np.concatenate([spec.delta, cfg.eta])
    return rk4_integrate(spec, s0, fld, t_end, h, rates=rates,
                         integrator="coupled")


def nash_stationarity_check(spec: GameSpec, s: SocialState,
                            cfg: EvolutionConfig,
                            tol: float = 1e-6) -> tuple[bool, bool]:
    """(is_rest_point, is_equilibrium). The two agree for Nash-stationary
    protocols (best response, projection); replicator and logit are allowed
    but flagged, since their rest points need not be equilibria."""
    from .equilibrium import residuals

    for proto in cfg.protocols:
        if proto.base.kind not in _NS_PROTOCOLS:
            warnings.warn(
                f"protocol {proto.base.kind!r} does not satisfy Nash "
                "stationarity; rest points may not be equilibria",
                stacklevel=2)
            break
    dpi, dd = coupled_field(spec, s, cfg)
    is_rest = max(float(np.max(np.abs(dpi))),
                  float(np.max(np.abs(dd)))) < tol
    rp, rd = residuals(spec, s)
    return is_rest, max(rp, rd) < tol
