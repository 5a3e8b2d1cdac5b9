"""Block-iterative distributed optimization over directed networks.

Agents cooperatively minimize a sum of smooth (possibly nonconvex) local
costs plus a convex block-separable regularizer over a digraph.  Every
iteration each agent convexifies its cost on one self-selected block, takes
a damped step, and runs block-wise push-sum consensus with gradient
tracking so that local models stay informed about the network-wide
gradient.  Includes the sparse-regression application, merit tracking, a
full-vector baseline, and a deterministic CLI experiment runner.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .block_consensus import (
    BlockLayout,
    BlockSchedule,
    DecayEstimate,
    ProtocolViolationError,
    build_block_weights,
    check_T_connectivity,
    consensus_step,
    measure_geometric_decay,
    next_block,
    run_block_consensus,
    weighted_average,
)
from .config import ConfigError, ExperimentConfig, load_config, save_config
from .core import (
    AgentStates,
    DivergenceError,
    Message,
    StepSchedule,
    broadcast_messages,
    communication_step,
    init_states,
    optimization_step,
    run,
    step_size_next,
)
from .metrics import (
    MetricsLog,
    completion_time,
    disagreement,
    dgrad_step,
    make_stationarity_merit,
    read_trace,
    run_dgrad,
    stationarity_residual,
    write_trace,
)
from .regression import (
    RegressionInstance,
    RegressionProblem,
    centralized_reference_solve,
    dg0_minus,
    eta,
    g0,
    generate_instance,
    l_surrogate,
    load_instance,
    make_subproblem,
    pl_surrogate,
    save_instance,
    soft_threshold,
)
from .surrogates import (
    Box,
    CompositeBlockProblem,
    SmoothFunction,
    SubproblemError,
    SurrogateModel,
    make_dc_split,
    make_partial_convexity,
    make_prox_linear,
    make_second_order,
    solve_block_subproblem,
    verify_gradient_consistency,
)
from .topology import (
    Digraph,
    GraphError,
    WeightMatrix,
    algebraic_connectivity,
    build_column_stochastic,
    generate_connected_erdos_renyi,
    generate_erdos_renyi,
    is_strongly_connected,
    load_edge_list,
    save_edge_list,
)
