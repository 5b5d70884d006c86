"""Built-in example games and a seeded random-game generator.

Built-ins:

* ``hawk-dove-hunger`` -- one type, states {sated, hungry}, actions
  {hawk, dove}. Agents are matched against the field: the hawk share of play
  is induced by (pi, d), stage rewards are linear in it, and winning a contest
  feeds the agent (next state sated) while losing leaves it hungry. Food is
  worth more to a hungry agent. Transition rows are normalized exactly by
  construction.
* ``periodic-swap`` -- one type, two states, one action, deterministic swap
  independent of the social state. Its unique stationary distribution splits
  the mass evenly, yet synchronous updates started off it oscillate forever.
* ``singleton-hawk-dove`` -- the classical hawk-dove matrix game embedded as
  a one-state game (contest value 2, cost 3; mixed equilibrium hawk share
  value/cost = 2/3).
"""

from __future__ import annotations

import os

import numpy as np

from . import expr as ex
from .errors import SpecError
from .gamefile import GameDocument, parse_game_file, spec_from_document
from .types import GameSpec

SATED, HUNGRY = 0, 1
HAWK, DOVE = 0, 1


def hawk_dove_hunger(v_sated: float = 1.0, v_hungry: float = 3.0,
                     cost: float = 2.0, alpha: float = 0.8,
                     delta: float = 1.0) -> GameSpec:
    """Hawk-dove contests whose stakes depend on the contestant's hunger.

    With the default parameters the game has a strict pure stationary
    equilibrium: hungry agents fight (hawk), sated agents yield (dove), and
    half the population is sated at any time.
    """
    values = np.array([v_sated, v_hungry])

    def hawk_share(pi, d):
        # probability a random opponent plays hawk (single type, g = 1)
        return float(np.dot(d[0], pi[0, :, HAWK]))

    def transitions(pi, d):
        y = hawk_share(pi, d)
        w_hawk = 1.0 - 0.5 * y          # wins half vs hawk, always vs dove
        w_dove = 0.5 * (1.0 - y)        # shares only vs dove
        p = np.zeros((1, 2, 2, 2))
        p[0, :, HAWK, SATED] = w_hawk
        p[0, :, HAWK, HUNGRY] = 1.0 - w_hawk
        p[0, :, DOVE, SATED] = w_dove
        p[0, :, DOVE, HUNGRY] = 1.0 - w_dove
        return p

    def rewards(pi, d):
        y = hawk_share(pi, d)
        r = np.zeros((1, 2, 2))
        r[0, :, HAWK] = y * (values - cost) / 2.0 + (1.0 - y) * values
        r[0, :, DOVE] = (1.0 - y) * values / 2.0
        return r

    return GameSpec(
        n_tau=1, n_x=2, n_a=2,
        action_mask=np.ones((1, 2, 2), dtype=bool),
        g=np.array([1.0]), alpha=np.array([alpha]), delta=np.array([delta]),
        transitions=transitions, rewards=rewards, name="hawk-dove-hunger",
    )


def periodic_swap(delta: float = 1.0) -> GameSpec:
    """Deterministic two-state swap chain; the synchronous counterexample."""
    p_fixed = np.zeros((1, 2, 1, 2))
    p_fixed[0, 0, 0, 1] = 1.0
    p_fixed[0, 1, 0, 0] = 1.0
    p_fixed.setflags(write=False)
    r_fixed = np.zeros((1, 2, 1))
    r_fixed.setflags(write=False)
    return GameSpec(
        n_tau=1, n_x=2, n_a=1,
        action_mask=np.ones((1, 2, 1), dtype=bool),
        g=np.array([1.0]), alpha=np.array([0.0]), delta=np.array([delta]),
        transitions=lambda pi, d: p_fixed, rewards=lambda pi, d: r_fixed,
        name="periodic-swap",
    )


def singleton(payoffs, g=None, alpha=None, delta=None,
              name: str = "singleton") -> GameSpec:
    """Embed a classical population game as a one-state dynamic game.

    `payoffs` is one expression string per action, per type (population);
    expressions may reference the action shares pi(tau, a, 0) and masses
    g(tau). States are trivial: every action keeps the single state.
    """
    n_tau = len(payoffs)
    n_a = max(len(row) for row in payoffs)
    if g is None:
        g = [1.0 / n_tau] * n_tau
    alpha = [0.0] * n_tau if alpha is None else list(alpha)
    delta = [1.0] * n_tau if delta is None else list(delta)

    ragged = any(len(row) != n_a for row in payoffs)
    mask_triples = None
    if ragged:
        mask_triples = tuple((tau, 0, a)
                             for tau, row in enumerate(payoffs)
                             for a in range(len(row)))
    transitions = {}
    rewards = {}
    for tau, row in enumerate(payoffs):
        for a, text in enumerate(row):
            transitions[(tau, 0, a, 0)] = ex.Num(1.0)
            rewards[(tau, 0, a)] = ex.parse_expr(text)
    doc = GameDocument(n_tau=n_tau, n_x=1, n_a=n_a,
                       g=tuple(float(v) for v in g),
                       alpha=tuple(float(v) for v in alpha),
                       delta=tuple(float(v) for v in delta),
                       mask_triples=mask_triples,
                       transitions=transitions, rewards=rewards, name=name)
    return spec_from_document(doc)


def singleton_hawk_dove(value: float = 2.0, cost: float = 3.0) -> GameSpec:
    """Single-population hawk-dove against the field; mixed equilibrium at
    hawk share value/cost."""
    hawk = f"{(value - cost) / 2.0!r}*pi(0,0,0) + {value!r}*pi(0,1,0)"
    dove = f"{value / 2.0!r}*pi(0,1,0)"
    return singleton([[hawk, dove]], name="singleton-hawk-dove")


def random_game(seed: int, max_types: int = 3, max_states: int = 4,
                max_actions: int = 3) -> GameSpec:
    """A seeded random game with affine expression transitions.

    Each transition row blends two fixed distributions with a weight that is
    either a policy share, a normalized state share d(t,x)/g(t), or a
    constant, so rows stay exactly on the simplex for every social state.
    """
    rng = np.random.default_rng(seed)
    n_tau = int(rng.integers(1, max_types + 1))
    n_x = int(rng.integers(2, max_states + 1))
    n_a = int(rng.integers(1, max_actions + 1))

    g = 0.8 * rng.dirichlet(np.full(n_tau, 2.0)) + 0.2 / n_tau
    alpha = rng.uniform(0.3, 0.95, n_tau)
    delta = rng.uniform(0.5, 2.0, n_tau)

    mask = rng.random((n_tau, n_x, n_a)) < 0.8
    for tau in range(n_tau):
        for x in range(n_x):
            if not mask[tau, x].any():
                mask[tau, x, rng.integers(n_a)] = True
    unmasked = [tuple(int(v) for v in idx) for idx in np.argwhere(mask)]

    def weight_expr() -> str:
        kind = rng.integers(3)
        if kind == 0:
            tau, x, a = unmasked[rng.integers(len(unmasked))]
            return f"pi({tau},{a},{x})"
        if kind == 1:
            tau = int(rng.integers(n_tau))
            x = int(rng.integers(n_x))
            return f"d({tau},{x})/g({tau})"
        return repr(float(rng.uniform(0.0, 1.0)))

    transitions = {}
    rewards = {}
    for tau, x, a in unmasked:
        q0 = rng.dirichlet(np.ones(n_x))
        q1 = rng.dirichlet(np.ones(n_x))
        m = weight_expr()
        for to in range(n_x):
            text = f"{float(q0[to])!r} + {float(q1[to] - q0[to])!r}*({m})"
            transitions[(tau, x, a, to)] = ex.parse_expr(text)
        c0 = float(rng.uniform(-2.0, 2.0))
        c1 = float(rng.uniform(-2.0, 2.0))
        rewards[(tau, x, a)] = ex.parse_expr(f"{c0!r} + {c1!r}*({weight_expr()})")

    doc = GameDocument(
        n_tau=n_tau, n_x=n_x, n_a=n_a,
        g=tuple(float(v) for v in g),
        alpha=tuple(float(v) for v in alpha),
        delta=tuple(float(v) for v in delta),
        mask_triples=tuple(unmasked) if not mask.all() else None,
        transitions=transitions, rewards=rewards, name=f"random-{seed}",
    )
    return spec_from_document(doc)


BUILTIN_GAMES = {
    "hawk-dove-hunger": hawk_dove_hunger,
    "periodic-swap": periodic_swap,
    "singleton-hawk-dove": singleton_hawk_dove,
}


def load_game(source: str) -> GameSpec:
    """Resolve a game source: a built-in name, or a path to a game file."""
    if source in BUILTIN_GAMES:
        return BUILTIN_GAMES[source]()
    if os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            return parse_game_file(fh.read(), name=os.path.basename(source))
    raise SpecError(f"unknown game {source!r}: not a built-in name "
                    f"({', '.join(sorted(BUILTIN_GAMES))}) or a file path")
