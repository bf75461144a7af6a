import math


INSTANCE_VERSION = 1

# Projector realizations
PROJECTOR_MODES = ["generic", "product"]

# Free-site handling when comparing product states
FREE_POLICIES = ["exclude", "include"]

# Zero-mode counting modes
ZERO_MODE_MODES = ["exact_product", "generic_bound"]

# Satisfiability verdicts
SAT = "SAT"
UNSAT = "UNSAT"
UNDECIDED = "UNDECIDED"
VERDICTS = [SAT, UNSAT, UNDECIDED]

# Table formats
TABLE_FORMATS = ["csv", "parquet"]

# Sampling defaults
DEFAULT_K = 3
DEFAULT_SEED = 0

# Core statistics
LAMBDA_STAR_TOL = 1e-12
LAMBDA_STAR_SCAN_POINTS = 20000
LAMBDA_STAR_SCAN_MIN = 1e-6
DEGREE_LAW_TAIL = 1e-16

# Dimer enumeration
DEFAULT_ENUMERATION_BOUND = None

# Cavity defaults
DEFAULT_POP_SIZE = 10_000
DEFAULT_SWEEPS = 4000
DEFAULT_BURN_IN = 0.75
DEFAULT_DRIFT_TOL = 5e-3
DEFAULT_BP_TOL = 1e-10
DEFAULT_BP_MAX_SWEEPS = 5000
DEFAULT_DAMPING = 0.5
DEFAULT_LAMBDAS = [1e1, 1e2, 1e3, 1e4]
MAX_FIT_CONDITION = 1e10

# Spectrum defaults
DEFAULT_MAX_QUBITS = 24
DEFAULT_DENSE_THRESHOLD = 14
DEFAULT_LANCZOS_TOL = 1e-10
DEFAULT_LANCZOS_MAX_ITER = 1000
# Bytes a Krylov basis may occupy before switching to restarted ARPACK
DEFAULT_BASIS_MEMORY = 2 ** 32
DENSE_BLOCK_COLUMNS = 256
DEFAULT_EPS_SAT = 1e-8
DEFAULT_EPS_UNSAT = 1e-6
DEFAULT_KERNEL_EPS = 1e-8
DEFAULT_KERNEL_MAX_DIM = 64
KERNEL_AMBIGUITY_FACTOR = 100.0

# UNSAT-core experiment defaults
DEFAULT_EXPERIMENT_ALPHA = 1.0
DEFAULT_EXPERIMENT_SIZES = [10, 12, 14]
DEFAULT_EXPERIMENT_SAMPLES = 50
DEFAULT_MAX_ATTEMPTS = 200_000

# Entropy defaults
SPAN_RANK_TOL = 1e-8
MODE_RANK_TOL = 1e-10

# Reference anchors quoted in the literature for k = 3 at the PRODSAT point
REFERENCE_ALPHA_C = 0.917
REFERENCE_LAMBDA_STAR = 2.149
REFERENCE_PAULING = 0.37
REFERENCE_CORE_ENTROPY = 0.23
REFERENCE_GAMMA = 0.2
REFERENCE_HAIR_FRACTION = 0.4
REFERENCE_LEDGER = {
    "s_core_per_N": 0.14,
    "s_zero_per_N": 0.2,
    "s_hair_upper_per_N": 0.28,
}

# Regular k = d = 3 asymptotic series, coefficients of (1, λ^-1/2, λ^-1)
REGULAR_OCCUPANCY_SERIES = (1.0, -0.47, 0.06)
REGULAR_ENTROPY_SERIES = (0.29, 0.94, -0.06)

NATS_PER_BIT = math.log(2.0)

# Column names
CORE_STATS_COLUMNS = ["alpha", "lambda_star", "nc_frac", "mc_frac", "beta"]
CORE_SAMPLE_COLUMNS = [
    "sample", "n", "m", "n_core", "m_core", "nc_frac", "mc_frac",
    "degree_sum_core"
]
ENUMERATION_COLUMNS = ["instance_id", "N_c", "M_c", "count", "log_count"]
CAVITY_COLUMNS = [
    "beta", "lambda", "pop_size", "sweeps", "F_density", "occupancy",
    "entropy_density", "converged"
]
FINITE_SIZE_COLUMNS = [
    "instance_id", "N_c", "M_c", "lambda", "log_count", "S_exact",
    "S_bp", "bp_converged"
]
SPECTRUM_COLUMNS = [
    "N", "N_c", "M_c", "seed", "minifan_count", "e0", "residual", "verdict",
    "iters", "wall_ms"
]
EXPERIMENT_SUMMARY_COLUMNS = [
    "N", "N_c", "samples", "decidable", "p_unsat", "p_unsat_err",
    "p_unsat_minifan", "p_unsat_no_minifan", "minifan_fraction", "deficit"
]

# Dtype mapping for result tables
DTYPE_MAP = {
    "alpha": float,
    "lambda_star": float,
    "nc_frac": float,
    "mc_frac": float,
    "beta": float,
    "sample": int,
    "n": int,
    "m": int,
    "n_core": int,
    "m_core": int,
    "degree_sum_core": int,
    "instance_id": str,
    "N_c": int,
    "M_c": int,
    "count": str,
    "log_count": float,
    "lambda": float,
    "pop_size": int,
    "sweeps": int,
    "F_density": float,
    "occupancy": float,
    "entropy_density": float,
    "converged": bool,
    "S_exact": float,
    "S_bp": float,
    "bp_converged": bool,
    "N": int,
    "seed": int,
    "minifan_count": int,
    "e0": float,
    "residual": float,
    "verdict": str,
    "iters": int,
    "wall_ms": int,
    "samples": int,
    "decidable": int,
    "p_unsat": float,
    "p_unsat_err": float,
    "p_unsat_minifan": float,
    "p_unsat_no_minifan": float,
    "minifan_fraction": float,
    "deficit": int,
}
