"""MILP encodings, bound tightening, a built-in LP/branch-and-bound solver,
adversarial-example search, and MIP-based training for small discrete
networks."""

from .adversarial import AttackSpec, build_attack, verify_attack
from .bounds import (
    BoundSet,
    bounds_extended_serra,
    bounds_interval_bunel,
    bounds_interval_cheng,
    bounds_lp_tjeng,
    classify_stability,
    compute_bounds,
    load_bound_set,
    save_bound_set,
)
from .encodings import (
    FormulationSpec,
    encode_network,
    feasible_point,
    make_hull_separator,
    partition_indices,
    separate_hull_cut,
)
from .fileio import export_lp, export_mps, parse_lp, parse_mps
from .fixtures import FixtureSpec, gen_network
from .model import MipModel, SolveResult, VarRole
from .network import (
    Activations,
    AvgPoolLayer,
    DenseLayer,
    MaxPoolLayer,
    Network,
    forward,
    load_network,
    save_network,
)
from .solver import OracleResult, SolverParams, pattern_oracle, solve_lp, solve_mip
from .training import (
    TrainingSpec,
    decode_trained,
    encode_binarized_training,
    encode_binary_training,
    encode_training,
)

__all__ = [
    "Activations",
    "AttackSpec",
    "AvgPoolLayer",
    "BoundSet",
    "DenseLayer",
    "FixtureSpec",
    "FormulationSpec",
    "MaxPoolLayer",
    "MipModel",
    "Network",
    "OracleResult",
    "SolveResult",
    "SolverParams",
    "TrainingSpec",
    "VarRole",
    "bounds_extended_serra",
    "bounds_interval_bunel",
    "bounds_interval_cheng",
    "bounds_lp_tjeng",
    "build_attack",
    "classify_stability",
    "compute_bounds",
    "decode_trained",
    "encode_binarized_training",
    "encode_binary_training",
    "encode_network",
    "encode_training",
    "export_lp",
    "export_mps",
    "feasible_point",
    "forward",
    "gen_network",
    "load_bound_set",
    "load_network",
    "make_hull_separator",
    "parse_lp",
    "parse_mps",
    "partition_indices",
    "pattern_oracle",
    "save_bound_set",
    "save_network",
    "separate_hull_cut",
    "solve_lp",
    "solve_mip",
    "verify_attack",
]

__version__ = "0.1.0"
