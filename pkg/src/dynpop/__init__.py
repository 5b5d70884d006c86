"""Dynamic population games: definitions, equilibria, dynamics, simulation."""

from .abm import AbmConfig, convergence_study, simulate
from .dynamics import (Trajectory, async_field, integrate_async, sync_run,
                       sync_step)
from .equilibrium import (EquilibriumReport, certify, residuals, solve,
                          solve_many)
from .evolution import (EvolutionConfig, RevisionProtocol, coupled_field,
                        integrate_coupled, mean_dynamic,
                        nash_stationarity_check)
from .games import (BUILTIN_GAMES, hawk_dove_hunger, load_game,
                    periodic_swap, random_game, singleton,
                    singleton_hawk_dove)
from .gamefile import parse_game_file, serialize_game
from .mdp import (BestResponseSet, MdpView, best_response, mdp_view,
                  policy_iteration, q_values, stochastic_matrix,
                  value_function)
from .reduction import classical_nash_residual, reduce, theorem2_crosscheck
from .types import (GameSpec, Policy, SocialState, StateDistribution,
                    random_social_state, uniform_social_state, validate_spec)

__version__ = "0.1.0"
