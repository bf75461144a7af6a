__version__ = "0.1.0"

from qsat.hypergraph import (
    InteractionGraph, ProjectorSet, InfeasibleEnsembleError, sample_er_graph,
    sample_projectors, find_minifans, degree_histogram, save_instance,
    load_instance,
)
from qsat.core import (
    CoreDecomposition, CoreStats, DegreeLaw, strip_core, lambda_star,
    core_stats, empirical_vs_analytic, sample_cores,
)
from qsat.dimer import (
    DimerCovering, LoopStructure, ProductState, has_covering,
    enumerate_coverings, maximum_covering, loop_structure, build_product_state,
    log_overlap,
)
from qsat.cavity import (
    CavityPopulation, CavityReport, single_instance_bp, population_dynamics,
    regular_fixed_point, extrapolate_lambda,
)
from qsat.spectrum import (
    HamiltonianHandle, SpectrumReport, apply_h, ground_energy,
    kernel_dimension, decide_sat, unsat_core_experiment,
)
from qsat.entropy import (
    EntropyLedger, ModeMatrix, pauling_estimate, binary_entropy,
    geometric_hair_entropy, zero_mode_dimension, zero_mode_entropy_rate,
    steepest_descent_exponent, linearized_zero_modes, ledger,
)
from qsat.utils import RngSpec
