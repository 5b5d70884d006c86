"""Finite-population Monte Carlo simulator of the microscopic process.

Event-driven: every agent carries an independent Poisson interaction clock
with rate delta_tau, and the event queue is their superposition, so there is
no time-discretization bias. Agents remember the action they last played in
each state (inertia). At an interaction the agent either samples an action
from the reference policy (state-only mode), or, in state-and-revision mode,
replays its remembered action with probability 1 - eta and otherwise switches
according to the protocol's switch rule evaluated on the empirical
single-stage deviation rewards. State transitions always sample the kernel at
the empirical social state (pi_hat, d_hat), never at the reference one; that
self-containment is what makes the simulator an independent check of the
mean-field equations instead of a re-integration of them.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ._parallel import run_parallel
from .dynamics import Trajectory, TrajectoryMeta
from .errors import ConfigError
from .evolution import RevisionProtocol
from .mdp import TIE_TOL
from .types import GameSpec, Policy, SocialState, StateDistribution

STATE_ONLY = "state-only"
STATE_AND_REVISION = "state-and-revision"
_SWITCHABLE = ("best-response", "logit", "replicator")


@dataclass(frozen=True)
class AbmConfig:
    mode: str
    t_end: float
    snapshot_interval: float = 0.1
    eta: float | np.ndarray = 1.0          # revision probability per type
    protocol: RevisionProtocol | None = None
    imitation_scale: float = 1.0           # replicator switch normalization

    def __post_init__(self):
        if self.mode not in (STATE_ONLY, STATE_AND_REVISION):
            raise ConfigError(f"unknown ABM mode {self.mode!r}")
        if self.t_end <= 0 or self.snapshot_interval <= 0:
            raise ConfigError("t_end and snapshot_interval must be positive")
        if self.mode == STATE_AND_REVISION:
            if self.protocol is None:
                raise ConfigError("state-and-revision mode needs a protocol")
            if self.protocol.base.kind not in _SWITCHABLE:
                raise ConfigError(
                    f"protocol {self.protocol.base.kind!r} defines no "
                    "per-agent switch probabilities")

    def eta_vector(self, n_tau: int) -> np.ndarray:
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), (n_tau,))
        if (eta <= 0).any() or (eta > 1).any():
            raise ConfigError("revision probabilities eta must lie in (0, 1]")
        return np.array(eta)


def type_counts(n: int, g: np.ndarray) -> np.ndarray:
    """Largest-remainder rounding of n*g; errors out when a type would get
    less than one agent."""
    raw = n * g
    if (raw < 1).any():
        raise ConfigError(
            f"population of {n} cannot represent the smallest type mass "
            f"{float(g.min()):g}")
    base = np.floor(raw).astype(int)
    short = n - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return base


def simulate(spec: GameSpec, cfg: AbmConfig, n: int, seed: int,
             s0: SocialState | None = None) -> Trajectory:
    """Run one simulation; (seed, n, cfg) determine the result bitwise.

    Snapshots on the regular grid record the empirical distribution
    d_hat[tau, x] = #(agents of tau in x)/n and the empirical policy
    pi_hat[tau, a|x] = share of type-tau agents whose remembered action for
    state x is a. The returned trajectory carries both.
    """
    if n < 10:
        raise ConfigError("need at least 10 agents")
    if s0 is None:
        from .types import uniform_social_state
        s0 = uniform_social_state(spec)
    rng = np.random.default_rng(seed)
    counts = type_counts(n, spec.g)
    eta = (cfg.eta_vector(spec.n_tau)
           if cfg.mode == STATE_AND_REVISION else None)

    types = np.repeat(np.arange(spec.n_tau), counts)
    states = np.empty(n, dtype=int)
    last_action = np.empty((n, spec.n_x), dtype=int)
    state_counts = np.zeros((spec.n_tau, spec.n_x), dtype=int)
    la_counts = np.zeros((spec.n_tau, spec.n_x, spec.n_a), dtype=int)

    offset = 0
    for tau in range(spec.n_tau):
        c = int(counts[tau])
        dist = s0.d.table[tau] / s0.d.masses[tau]
        block = rng.choice(spec.n_x, size=c, p=dist)
        states[offset:offset + c] = block
        for x in range(spec.n_x):
            state_counts[tau, x] = int((block == x).sum())
            acts = rng.choice(spec.n_a, size=c, p=s0.pi.table[tau, x])
            last_action[offset:offset + c, x] = acts
            for a in range(spec.n_a):
                la_counts[tau, x, a] = int((acts == a).sum())
        offset += c

    scale = 1.0 / spec.delta[types]
    heap = [(float(t), int(i))
            for i, t in enumerate(rng.exponential(scale))]
    heapq.heapify(heap)

    n_snaps = int(np.floor(cfg.t_end / cfg.snapshot_interval + 1e-9)) + 1
    snap_times = np.arange(n_snaps) * cfg.snapshot_interval
    snapshots = []

    def tables():
        d_hat = state_counts / n
        pi_hat = la_counts / counts[:, None, None]
        return pi_hat, d_hat

    def record():
        pi_hat, d_hat = tables()
        snapshots.append(SocialState(
            Policy(pi_hat, spec.action_mask),
            StateDistribution(d_hat, counts / n)))

    record()
    next_snap = 1
    while heap:
        t, i = heapq.heappop(heap)
        while next_snap < n_snaps and snap_times[next_snap] <= t:
            record()
            next_snap += 1
        if t > cfg.t_end:
            break
        tau = int(types[i])
        x = int(states[i])

        if cfg.mode == STATE_ONLY:
            a = _sample_row(rng, s0.pi.table[tau, x])
        else:
            a = int(last_action[i, x])
            if rng.random() < eta[tau]:
                pi_hat, d_hat = tables()
                q_row = _q_row(spec, tau, x, pi_hat, d_hat)
                zeta = _switch_distribution(
                    cfg.protocol, q_row, pi_hat[tau, x], a,
                    spec.unmasked(tau, x), cfg.imitation_scale)
                a = _sample_row(rng, zeta)

        old = int(last_action[i, x])
        if old != a:
            la_counts[tau, x, old] -= 1
            la_counts[tau, x, a] += 1
            last_action[i, x] = a

        pi_hat, d_hat = tables()
        p = spec.transition_table(pi_hat, d_hat)
        x_next = _sample_row(rng, p[tau, x, a])
        if x_next != x:
            state_counts[tau, x] -= 1
            state_counts[tau, x_next] += 1
            states[i] = x_next

        heapq.heappush(heap, (t + rng.exponential(scale[i]), i))

    while next_snap < n_snaps:
        record()
        next_snap += 1

    return Trajectory(snap_times, snapshots,
                      TrajectoryMeta(integrator=f"abm-{cfg.mode}",
                                     step_size=cfg.snapshot_interval,
                                     seed=seed))


def _sample_row(rng: np.random.Generator, probs: np.ndarray) -> int:
    cum = np.cumsum(probs)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))


def _q_row(spec: GameSpec, tau: int, x: int, pi_hat: np.ndarray,
           d_hat: np.ndarray) -> np.ndarray:
    """Single-stage deviation rewards Q[x, .] for one type, evaluated at the
    empirical social state; masked slots are -inf."""
    p = spec.transition_table(pi_hat, d_hat)[tau]
    r = spec.reward_table(pi_hat, d_hat)[tau]
    P = np.einsum("xa,xay->xy", pi_hat[tau], p)
    R = np.einsum("xa,xa->x", pi_hat[tau], r)
    alpha = float(spec.alpha[tau])
    V = np.linalg.solve(np.eye(spec.n_x) - alpha * P, R)
    q = r[x] + alpha * (p[x] @ V)
    return np.where(spec.action_mask[tau, x], q, -np.inf)


def _switch_distribution(protocol: RevisionProtocol, q_row: np.ndarray,
                         pi_row: np.ndarray, current: int,
                         acts: np.ndarray, imitation_scale: float) -> np.ndarray:
    """zeta[. | current]: probability of switching to each action."""
    base = protocol.base
    zeta = np.zeros(q_row.shape)
    if base.kind == "best-response":
        members = q_row >= q_row[acts].max() - TIE_TOL
        zeta[members] = 1.0 / members.sum()
        return zeta
    if base.kind == "logit":
        z = np.exp((q_row[acts] - q_row[acts].max()) / base.temperature)
        zeta[acts] = z / z.sum()
        return zeta
    # replicator via pairwise proportional imitation: copy an observed action
    # with probability proportional to its payoff advantage
    gain = np.clip(q_row[acts] - q_row[current], 0.0, None)
    probs = pi_row[acts] * gain / imitation_scale
    total = probs.sum()
    if total > 1.0:
        raise ConfigError(
            "imitation_scale too small: switch probabilities exceed 1")
    zeta[acts] = probs
    zeta[current] += 1.0 - total
    return zeta


# ---------------------------------------------------------------------------
# Mean-field consistency studies


@dataclass(frozen=True)
class StudyResult:
    n_values: tuple[int, ...]
    seeds: tuple[int, ...]
    errors: np.ndarray          # (len(n_values), len(seeds))

    @property
    def mean_errors(self) -> np.ndarray:
        return self.errors.mean(axis=1)

    @property
    def slope(self) -> float:
        """Least-squares slope of log(mean error) against log(n)."""
        return float(np.polyfit(np.log(self.n_values),
                                np.log(self.mean_errors), 1)[0])

    def to_csv_text(self) -> str:
        lines = ["n,seed,error"]
        for i, n in enumerate(self.n_values):
            for j, seed in enumerate(self.seeds):
                lines.append(f"{n},{seed},{self.errors[i, j]!r}")
        lines.append(f"slope,,{self.slope!r}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "n_values": list(self.n_values),
            "seeds": list(self.seeds),
            "errors": self.errors.tolist(),
            "mean_errors": self.mean_errors.tolist(),
            "slope": self.slope,
        }


def trajectory_sup_error(sim: Trajectory, reference: Trajectory,
                         compare: str) -> float:
    """Sup over time and entries of |simulated - reference|, with the
    reference linearly interpolated at the simulation snapshot times."""
    if compare not in ("d", "pi", "both"):
        raise ConfigError("compare must be 'd', 'pi' or 'both'")
    worst = 0.0
    if compare in ("d", "both"):
        worst = max(worst, _component_error(
            sim.times, sim.distributions(), reference.times,
            reference.distributions()))
    if compare in ("pi", "both"):
        worst = max(worst, _component_error(
            sim.times, sim.policies(), reference.times,
            reference.policies()))
    return worst


def _component_error(times, values, ref_times, ref_values) -> float:
    flat = values.reshape(len(times), -1)
    ref_flat = ref_values.reshape(len(ref_times), -1)
    worst = 0.0
    for j in range(flat.shape[1]):
        interp = np.interp(times, ref_times, ref_flat[:, j])
        worst = max(worst, float(np.max(np.abs(flat[:, j] - interp))))
    return worst


def convergence_study(spec: GameSpec, cfg: AbmConfig, n_values, seeds,
                      reference: Trajectory, compare: str | None = None,
                      s0: SocialState | None = None) -> StudyResult:
    """Mean sup-norm error against the integrated reference per population
    size, over the given seeds; independent cells run in parallel."""
    if compare is None:
        compare = "d" if cfg.mode == STATE_ONLY else "pi"
    n_values = tuple(int(v) for v in n_values)
    seeds = tuple(int(v) for v in seeds)
    cells = [(n, seed) for n in n_values for seed in seeds]

    def cell(args):
        n, seed = args
        sim = simulate(spec, cfg, n, seed, s0=s0)
        return trajectory_sup_error(sim, reference, compare)

    flat = run_parallel(cell, cells)
    errors = np.array(flat).reshape(len(n_values), len(seeds))
    return StudyResult(n_values, seeds, errors)
