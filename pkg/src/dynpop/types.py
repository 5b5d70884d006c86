"""Core domain types: game definitions, policies, distributions, social states.

Conventions used throughout the package:

* policy tables are arrays pi[tau, x, a] (probability of action a in state x),
* state distributions are arrays d[tau, x] with sum_x d[tau, x] = g[tau],
* action masks are boolean arrays mask[tau, x, a]; per-action tables are dense
  with zeros on masked slots,
* transition evaluators map (pi, d) -> p[tau, x, a, x_next], reward evaluators
  map (pi, d) -> r[tau, x, a].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvalError, SpecError

# Probability hygiene: policy rows and distribution masses are exact to
# PROB_TOL; evaluated transition rows may be off by up to ROW_SUM_TOL
# (declarative expressions accumulate rounding) and are then renormalized,
# with entries in [-NEG_CLIP, 0) clipped to zero.
PROB_TOL = 1e-12
ROW_SUM_TOL = 1e-9
NEG_CLIP = 1e-12


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Policy:
    """Per-type behavioral policy; rows pi[tau, x, :] are distributions over
    the unmasked actions."""

    table: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        table = _frozen(self.table)
        mask = _frozen(self.mask, dtype=bool)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "mask", mask)
        if table.shape != mask.shape or table.ndim != 3:
            raise SpecError("policy table and action mask shapes differ")
        if (table < 0).any():
            raise SpecError("policy has negative probabilities")
        if (table[~mask] != 0).any():
            raise SpecError("policy puts mass on masked actions")
        sums = table.sum(axis=2)
        if (np.abs(sums - 1.0) > PROB_TOL).any():
            raise SpecError("policy rows must sum to 1")

    @classmethod
    def uniform(cls, mask) -> "Policy":
        mask = np.asarray(mask, dtype=bool)
        counts = mask.sum(axis=2, keepdims=True)
        return cls(np.where(mask, 1.0, 0.0) / counts, mask)

    def row(self, tau: int, x: int) -> np.ndarray:
        return self.table[tau, x]


@dataclass(frozen=True)
class StateDistribution:
    """Per-type distribution over states; row tau sums to masses[tau]."""

    table: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        table = _frozen(self.table)
        masses = _frozen(self.masses)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "masses", masses)
        if table.ndim != 2 or masses.shape != (table.shape[0],):
            raise SpecError("state distribution shape mismatch")
        if (table < 0).any():
            raise SpecError("state distribution has negative entries")
        if (np.abs(table.sum(axis=1) - masses) > PROB_TOL).any():
            raise SpecError("state distribution rows must sum to the type masses")

    @classmethod
    def uniform(cls, masses, n_x: int) -> "StateDistribution":
        masses = np.asarray(masses, dtype=float)
        return cls(np.repeat(masses[:, None], n_x, axis=1) / n_x, masses)


@dataclass(frozen=True)
class SocialState:
    """The pair (pi, d): the macroscopic description of society."""

    pi: Policy
    d: StateDistribution

    def __post_init__(self):
        if self.pi.table.shape[:2] != self.d.table.shape:
            raise SpecError("policy and state distribution dimensions differ")


@dataclass(frozen=True)
class GameSpec:
    """Immutable definition of a dynamic population game.

    `transitions` and `rewards` are evaluators over raw (pi, d) arrays; use
    `transition_table` / `reward_table` for the checked, renormalized views.
    """

    n_tau: int
    n_x: int
    n_a: int
    action_mask: np.ndarray
    g: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    transitions: Callable[[np.ndarray, np.ndarray], np.ndarray]
    rewards: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "game"
    source: object = None   # declarative document, when parsed from a file

    def __post_init__(self):
        if min(self.n_tau, self.n_x, self.n_a) < 1:
            raise SpecError("all game dimensions must be at least 1")
        mask = _frozen(self.action_mask, dtype=bool)
        g = _frozen(self.g)
        alpha = _frozen(self.alpha)
        delta = _frozen(self.delta)
        object.__setattr__(self, "action_mask", mask)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", delta)
        if mask.shape != (self.n_tau, self.n_x, self.n_a):
            raise SpecError("action mask shape does not match game dimensions")
        if not mask.any(axis=2).all():
            raise SpecError("every (type, state) needs at least one allowed action")
        for name, arr in (("g", g), ("alpha", alpha), ("delta", delta)):
            if arr.shape != (self.n_tau,):
                raise SpecError(f"{name} must have one entry per type")
        if (g < 0).any() or abs(float(g.sum()) - 1.0) > PROB_TOL:
            raise SpecError("type masses g must be nonnegative and sum to 1")
        if (alpha < 0).any() or (alpha >= 1).any():
            raise SpecError("discount factors alpha must lie in [0, 1)")
        if (delta <= 0).any():
            raise SpecError("interaction rates delta must be positive")

    # -- checked evaluator views -------------------------------------------

    def transition_table(self, pi: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Evaluate transitions, zero masked slots, clip tiny negatives and
        renormalize rows; raises EvalError if a row is genuinely invalid."""
        p = self._call_evaluator(self.transitions, pi, d, "transition")
        if p.shape != (self.n_tau, self.n_x, self.n_a, self.n_x):
            raise SpecError("transition evaluator returned wrong shape "
                            f"{p.shape}")
        mask4 = self.action_mask[:, :, :, None]
        p = np.where(mask4, p, 0.0)
        if not np.isfinite(p).all():
            idx = self._first_bad(~np.isfinite(p).all(axis=3))
            raise EvalError("non-finite transition probability", *idx)
        if (p < -NEG_CLIP).any():
            idx = self._first_bad((p < -NEG_CLIP).any(axis=3))
            raise EvalError("negative transition probability", *idx)
        p = np.where(p < 0, 0.0, p)
        sums = p.sum(axis=3)
        bad = self.action_mask & (np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.any():
            idx = self._first_bad(bad)
            raise EvalError(
                f"transition row sums to {sums[idx]!r}, not 1", *idx)
        denom = np.where(self.action_mask, sums, 1.0)
        return p / denom[:, :, :, None]

    def reward_table(self, pi: np.ndarray, d: np.ndarray) -> np.ndarray:
        r = self._call_evaluator(self.rewards, pi, d, "reward")
        if r.shape != (self.n_tau, self.n_x, self.n_a):
            raise SpecError(f"reward evaluator returned wrong shape {r.shape}")
        r = np.where(self.action_mask, r, 0.0)
        if not np.isfinite(r).all():
            idx = self._first_bad(~np.isfinite(r))
            raise EvalError("non-finite reward", *idx)
        return r

    def _call_evaluator(self, fn, pi, d, what: str) -> np.ndarray:
        try:
            out = fn(pi, d)
        except EvalError:
            raise
        except Exception as exc:
            raise EvalError(f"{what} evaluator failed: {exc}") from exc
        return np.asarray(out, dtype=float)

    @staticmethod
    def _first_bad(flags: np.ndarray) -> tuple:
        return tuple(int(i) for i in np.argwhere(flags)[0])

    def unmasked(self, tau: int, x: int) -> np.ndarray:
        return np.flatnonzero(self.action_mask[tau, x])


def uniform_social_state(spec: GameSpec) -> SocialState:
    """Uniform policy over unmasked actions; states uniform, scaled to g."""
    return SocialState(
        Policy.uniform(spec.action_mask),
        StateDistribution.uniform(spec.g, spec.n_x),
    )


def random_social_state(spec: GameSpec, rng: np.random.Generator) -> SocialState:
    """A uniformly random valid social state (Dirichlet(1) rows)."""
    pi = np.zeros((spec.n_tau, spec.n_x, spec.n_a))
    for tau in range(spec.n_tau):
        for x in range(spec.n_x):
            acts = spec.unmasked(tau, x)
            pi[tau, x, acts] = rng.dirichlet(np.ones(acts.size))
    d = rng.dirichlet(np.ones(spec.n_x), size=spec.n_tau) * spec.g[:, None]
    return SocialState(Policy(pi, spec.action_mask),
                       StateDistribution(d, spec.g))


# ---------------------------------------------------------------------------
# Numerical well-formedness checks


@dataclass(frozen=True)
class Violation:
    kind: str          # "row-sum" | "negative-probability" | "non-finite-..."
    tau: int
    x: int
    a: int
    value: float
    sample: int


@dataclass(frozen=True)
class ValidationReport:
    game: str
    samples: int
    seed: int
    violations: tuple[Violation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "game": self.game,
            "samples": self.samples,
            "seed": self.seed,
            "valid": self.valid,
            "violations": [
                {"kind": v.kind, "tau": v.tau, "x": v.x, "a": v.a,
                 "value": v.value, "sample": v.sample}
                for v in self.violations
            ],
        }


def validate_spec(spec: GameSpec, samples: int = 100, seed: int = 0) -> ValidationReport:
    """Probe the raw evaluators at random valid social states and report any
    transition row off the simplex or non-finite quantity.

    Continuity of the evaluators is not machine-checkable; this checks
    numerical well-formedness only.
    """
    rng = np.random.default_rng(seed)
    found: list[Violation] = []
    mask = spec.action_mask
    for k in range(samples):
        s = random_social_state(spec, rng)
        p = spec._call_evaluator(spec.transitions, s.pi.table, s.d.table,
                                 "transition")
        r = spec._call_evaluator(spec.rewards, s.pi.table, s.d.table, "reward")
        if p.shape != (spec.n_tau, spec.n_x, spec.n_a, spec.n_x):
            raise SpecError(f"transition evaluator returned shape {p.shape}")
        if r.shape != (spec.n_tau, spec.n_x, spec.n_a):
            raise SpecError(f"reward evaluator returned shape {r.shape}")
        for tau, x, a in np.argwhere(mask):
            row = p[tau, x, a]
            if not np.isfinite(row).all():
                found.append(Violation("non-finite-transition", int(tau),
                                       int(x), int(a), float("nan"), k))
                continue
            low = float(row.min())
            if low < -NEG_CLIP:
                found.append(Violation("negative-probability", int(tau),
                                       int(x), int(a), low, k))
            total = float(row.sum())
            if abs(total - 1.0) > ROW_SUM_TOL:
                found.append(Violation("row-sum", int(tau), int(x), int(a),
                                       total, k))
            if not np.isfinite(r[tau, x, a]):
                found.append(Violation("non-finite-reward", int(tau), int(x),
                                       int(a), float(r[tau, x, a]), k))
    return ValidationReport(spec.name, samples, seed, tuple(found))
