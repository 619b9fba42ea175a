"""On-line reinforcement-learning control of linear-quadratic-Gaussian systems.

Kalman-filter state estimation, a geometric-stopping formulation of the LQG
problem, greedy control with respect to a quadratic value function, and TD(0)
learning of that value. Classical Riccati solutions are included as oracles.
"""

__version__ = "0.1.0"

from .errors import (DimensionError, EpisodeCapError, KalmanRLError, ModelError,  # noqa: E402
                     NoConvergenceError, NotPDInnerMatrixError, NotPSDError, NumericalError,
                     SingularInnovationError)
from .estimator import FilterState, kalman_gain, kalman_init, kalman_step  # noqa: E402
from .learner import (LearningSchedule, LearnResult, ValueEstimate, greedy_action,  # noqa: E402
                      learn, td_error, td_update, value_of)
from .model import (CostModel, LinearSystem, final_cost, load_model, model_from_dict,  # noqa: E402
                    model_to_dict, step_cost, validate_system)
from .planner import (RiccatiSolution, StationaryValue, bellman_operator, greedy_gain,  # noqa: E402
                      noise_bias, riccati_backward, stationary_pi)
from .sim import (CERTAINTY_EQUIVALENT, FULLY_OBSERVED, EpisodeTrace, LinearPolicy,  # noqa: E402
                  RngStream, Transition, evaluate_policy, sample_gaussian, simulate_batch,
                  simulate_episode, zero_policy)
