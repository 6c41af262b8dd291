"""Online control of strongly monotone games from constraint-violation feedback."""

__version__ = "0.1.0"

from .errors import (
    DivergedRunError,
    GameControlError,
    InvalidInputError,
    NoConvergenceError,
    TimescaleConditionError,
    UnsupportedOperationError,
)
from .game_model import (
    ConstraintSpec,
    ControlState,
    GameSpec,
    constraint_violation,
    evaluate_gradient,
    perturbed_gradient,
    utility,
)
from .projection import ActionSet, project, project_joint, project_oracle
from .dynamics import (
    NoiseModel,
    RecordOptions,
    StepSchedule,
    Trajectory,
    manager_update,
    player_update,
    run_trajectory,
    sample_noise,
    step_sizes,
)
from .ne_oracle import GMapParams, NeSolution, compute_gamma, g_map, operator_norm, solve_ne
from .scenarios import DsmParams, QuadParams, Scenario, gen_dsm, gen_quadratic, global_cost, sum_rewards
