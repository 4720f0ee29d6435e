"""Near-field ISAC transmit design: channel model, Fisher information,
conic SDP solving, SINR-constrained designs and tradeoff sweeps."""

from .channel import ChannelSet, build_channel_set, steering_derivative, steering_vector
from .conic import SolverSettings
from .designs import (
    build_subspace,
    dedicated_beamformers_from_Rd,
    extract_rank_one,
    feasibility_probe,
    solve_crb_min,
    solve_maxmin_echo,
    solve_maxmin_illumination,
)
from .fisher import assemble_fim, crb_from_fim, sum_crb
from .metrics import DesignSolution, beampattern_grid, echo_power, illumination_power, sinr
from .scenario import ArraySpec, ScenarioConfig, TargetSpec, UserSpec, load_scenario, save_scenario

__version__ = "0.1.0"
