"""Per-type MDP quantities at a fixed social state.

At a social state (pi, d) every type faces a finite MDP: aggregating the
transition kernel and stage rewards under the type policy gives the stochastic
matrix P and expected rewards R, the discounted value solves the linear system
(I - alpha P) V = R, and the single-stage deviation rewards are
Q[x, a] = r[x, a] + alpha * sum_x+ p[x+|x, a] V[x+]. Policy iteration on the
frozen MDP backs the equilibrium optimality certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CertificateError
from .types import GameSpec, Policy, SocialState

TIE_TOL = 1e-10


@dataclass(frozen=True)
class MdpView:
    """P, R, V, Q of every type at one social state. Masked Q slots hold
    -inf so they can never win a maximum."""

    P: np.ndarray   # (n_tau, n_x, n_x)
    R: np.ndarray   # (n_tau, n_x)
    V: np.ndarray   # (n_tau, n_x)
    Q: np.ndarray   # (n_tau, n_x, n_a)

    @property
    def q_zeroed(self) -> np.ndarray:
        """Q with masked slots replaced by 0, safe for policy averaging."""
        return np.where(np.isfinite(self.Q), self.Q, 0.0)


@dataclass(frozen=True)
class BestResponseSet:
    """Per (tau, x): actions within tie_tol of the best single-stage
    deviation reward, plus the canonical uniform mixture over them."""

    members: np.ndarray        # bool (n_tau, n_x, n_a)
    distribution: np.ndarray   # (n_tau, n_x, n_a)
    tie_tol: float

    def actions(self, tau: int, x: int) -> tuple[int, ...]:
        return tuple(int(a) for a in np.flatnonzero(self.members[tau, x]))


def mdp_view(spec: GameSpec, s: SocialState) -> MdpView:
    return _view_tables(spec, *_tables(spec, s), s.pi.table)


def _tables(spec: GameSpec, s: SocialState):
    return (spec.transition_table(s.pi.table, s.d.table),
            spec.reward_table(s.pi.table, s.d.table))


def _view_tables(spec: GameSpec, p: np.ndarray, r: np.ndarray,
                 pi: np.ndarray) -> MdpView:
    P = np.einsum("txa,txay->txy", pi, p)
    R = np.einsum("txa,txa->tx", pi, r)
    V = _solve_values(P, R, spec.alpha)
    Q = r + spec.alpha[:, None, None] * np.einsum("txay,ty->txa", p, V)
    Q = np.where(spec.action_mask, Q, -np.inf)
    return MdpView(P=P, R=R, V=V, Q=Q)


def _solve_values(P: np.ndarray, R: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    n_x = P.shape[1]
    A = np.eye(n_x)[None, :, :] - alpha[:, None, None] * P
    return np.linalg.solve(A, R[:, :, None])[:, :, 0]


def stochastic_matrix(spec: GameSpec, s: SocialState) -> np.ndarray:
    """P[tau, x, x+] = sum_a pi[a|x] p[x+|x, a](pi, d)."""
    p, _ = _tables(spec, s)
    return np.einsum("txa,txay->txy", s.pi.table, p)


def expected_rewards(spec: GameSpec, s: SocialState) -> np.ndarray:
    _, r = _tables(spec, s)
    return np.einsum("txa,txa->tx", s.pi.table, r)


def value_function(spec: GameSpec, s: SocialState) -> np.ndarray:
    """Discounted values via a direct linear solve of (I - alpha P) V = R."""
    return mdp_view(spec, s).V


def q_values(spec: GameSpec, s: SocialState) -> np.ndarray:
    """Single-stage deviation rewards; -inf on masked slots."""
    return mdp_view(spec, s).Q


def best_response(spec: GameSpec, s: SocialState,
                  tie_tol: float = TIE_TOL) -> BestResponseSet:
    return best_response_from_q(spec.action_mask, mdp_view(spec, s).Q, tie_tol)


def best_response_from_q(mask: np.ndarray, Q: np.ndarray,
                         tie_tol: float = TIE_TOL) -> BestResponseSet:
    top = np.max(np.where(mask, Q, -np.inf), axis=2)
    members = mask & (Q >= top[:, :, None] - tie_tol)
    counts = members.sum(axis=2, keepdims=True)
    return BestResponseSet(members=members,
                           distribution=members / counts,
                           tie_tol=tie_tol)


def policy_iteration(spec: GameSpec, s_frozen: SocialState,
                     max_iters: int = 1000,
                     improve_tol: float = 1e-9) -> tuple[Policy, int]:
    """Policy iteration on the MDPs frozen at s_frozen, initialized at
    s_frozen.pi; returns an optimal deterministic policy and the number of
    improvement steps performed (0 means the starting policy was already
    optimal, as at a stationary equilibrium)."""
    p = spec.transition_table(s_frozen.pi.table, s_frozen.d.table)
    r = spec.reward_table(s_frozen.pi.table, s_frozen.d.table)
    out = np.zeros_like(s_frozen.pi.table)
    steps = 0
    for tau in range(spec.n_tau):
        table, used, _ = _policy_iteration_type(
            p[tau], r[tau], spec.action_mask[tau], float(spec.alpha[tau]),
            s_frozen.pi.table[tau], max_iters, improve_tol)
        out[tau] = table
        steps = max(steps, used)
    return Policy(out, spec.action_mask), steps


def _policy_iteration_type(p, r, mask, alpha, pi0, max_iters, improve_tol):
    """Returns (deterministic optimal policy table, improvement steps,
    value of that policy) for a single frozen type MDP."""
    eye = np.eye(r.shape[0])
    pi_cur = pi0
    steps = 0

    def evaluate(pi):
        P = np.einsum("xa,xay->xy", pi, p)
        R = np.einsum("xa,xa->x", pi, r)
        return np.linalg.solve(eye - alpha * P, R)

    for _ in range(max_iters + 1):
        V = evaluate(pi_cur)
        Q = r + alpha * np.einsum("xay,y->xa", p, V)
        Qm = np.where(mask, Q, -np.inf)
        best = Qm.max(axis=1)
        current = np.einsum("xa,xa->x", pi_cur, np.where(mask, Q, 0.0))
        if (best - current <= improve_tol).all():
            greedy = _point_mass(Qm)
            return greedy, steps, evaluate(greedy)
        pi_cur = _point_mass(Qm)   # ties break to the lowest action index
        steps += 1
    raise CertificateError(
        f"policy iteration did not terminate within {max_iters} improvements")


def _point_mass(Qm: np.ndarray) -> np.ndarray:
    table = np.zeros_like(Qm)
    table[np.arange(Qm.shape[0]), Qm.argmax(axis=1)] = 1.0
    return table
