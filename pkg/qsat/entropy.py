from typing import Dict, List, Optional, Tuple

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import networkx as nx
from scipy.linalg import null_space
from scipy.special import entr

from qsat.core import DegreeLaw, core_stats
from qsat.dimer import ProductState
from qsat.enums import (
    ZERO_MODE_MODES, SPAN_RANK_TOL, MODE_RANK_TOL, NATS_PER_BIT,
    REFERENCE_LEDGER, REFERENCE_HAIR_FRACTION, REFERENCE_GAMMA,
)
from qsat.hypergraph import InteractionGraph, ProjectorSet
from qsat.utils import as_generator


class ParameterInconsistencyError(ValueError):
    """Raised when entropy inputs contradict each other."""


def pauling_estimate(beta: float, k: int, degree_law: DegreeLaw) -> float:
    """
    Pauling estimate of the core entropy per core qubit,
    beta log k + E[log((1 + d) / 2^d)], in nats.
    """
    assert degree_law.mean() > 0, "Degree law has no qubits of positive degree."
    degrees, pmf = degree_law.support()
    local = np.log1p(degrees) - degrees * math.log(2.0)
    return beta * math.log(k) + float(np.dot(pmf, local))


def pauling_estimate_graph(g: InteractionGraph) -> float:
    """Pauling estimate evaluated on the degrees of an actual core graph."""
    assert g.n_qubits > 0, "Empty graph."
    degrees = g.degrees
    local = np.log1p(degrees) - degrees * math.log(2.0)
    return g.alpha * math.log(g.k) + float(np.mean(local))


def binary_entropy(x: float) -> float:
    """Entropy of a coin with bias x, in nats."""
    assert 0.0 <= x <= 1.0, "Probability must lie in [0, 1]."
    return float(entr(x) + entr(1.0 - x))


def geometric_hair_entropy(
        n: float,
        m: float,
        n_c: float,
        m_c: float,
    ) -> Tuple[float, float]:
    """
    Geometric hair entropy S_2(1 - (M - M_c) / (N - N_c)). Counts may be
    given as fractions of N.

    Returns:
    -------
    per_spin: float
        Entropy per hair qubit.
    total: float
        per_spin times N_h = N - N_c.
    """
    assert n > n_c, "Graph has no hair."
    x = 1.0 - (m - m_c) / (n - n_c)
    if not 0.0 <= x <= 1.0:
        raise ParameterInconsistencyError(
            f"Hair fraction {x:.4f} outside [0, 1] "
            f"(N={n}, M={m}, N_c={n_c}, M_c={m_c})."
        )
    per_spin = binary_entropy(x)
    return per_spin, per_spin * (n - n_c)


def zero_mode_sector_dimensions(n_h: int, d: int, mode: str) -> List[int]:
    """
    Dimension D_n of the order-n sector of the zero-mode expansion: n
    hard-core bosons in d modes on n_h hair sites.

    Parameters:
    ----------
    n_h: int
        Number of hair qubits.
    d: int
        Number of zero modes, 0 <= d <= n_h.
    mode: str
        exact_product: C(d, n), the free-spin count.
        generic_bound: min(C(n + d - 1, n), C(n_h, n)).

    Returns:
    -------
    sectors: List[int]
        D_n for n = 0, 1, ...
    """
    assert mode in ZERO_MODE_MODES, \
        f"Invalid mode {mode}. Choose from exact_product, generic_bound."
    assert 0 <= d <= n_h, "Need 0 <= d <= N_h."
    if mode == "exact_product":
        return [math.comb(d, n) for n in range(d + 1)]
    if d == 0:
        return [1]
    return [min(math.comb(n + d - 1, n), math.comb(n_h, n))
            for n in range(n_h + 1)]


def zero_mode_dimension(n_h: int, d: int, mode: str) -> Tuple[int, float]:
    """Total zero-mode dimension D = sum_n D_n and log D."""
    total = sum(zero_mode_sector_dimensions(n_h, d, mode))
    return total, math.log(total)


def zero_mode_entropy_rate(gamma: float) -> float:
    """Zero-mode entropy per hair qubit: S_2(gamma) below 1/2, log 2 above."""
    assert 0.0 <= gamma <= 1.0, "gamma must lie in [0, 1]."
    return math.log(2.0) if gamma >= 0.5 else binary_entropy(gamma)


def steepest_descent_exponent(x: float, gamma: float) -> float:
    """
    Exponent f(x) = -[x log(x / (x + gamma)) + gamma log(gamma / (x + gamma))]
    of the order n = x N_h term of the zero-mode sum.
    """
    assert 0.0 < gamma < 1.0, "gamma must lie in (0, 1)."
    assert 0.0 < x <= 1.0 - gamma + 1e-15, "x must lie in (0, 1 - gamma]."
    total = x + gamma
    return -(x * math.log(x / total) + gamma * math.log(gamma / total))


@dataclass(frozen=True, eq=False)
class ModeMatrix:
    """
    Orthonormal basis w (d x N) of the kernel of the linearized zero-energy
    conditions, the constraint matrix it annihilates and that matrix's rank.
    """
    w: np.ndarray = field(repr=False)
    constraints: np.ndarray = field(repr=False)
    rank: int
    components: int = 1

    @property
    def d(self) -> int:
        return self.w.shape[0]


def _perpendicular(psi: np.ndarray) -> np.ndarray:
    return np.stack([-np.conj(psi[..., 1]), np.conj(psi[..., 0])], axis=-1)


def linearized_zero_modes(
        g: InteractionGraph,
        projectors: ProjectorSet,
        state: ProductState,
    ) -> ModeMatrix:
    """
    Kernel of the first-order variation of every clause condition around a
    satisfying product state. Qubit j moves as psi_j + c_j psi_j^perp; clause
    m contributes the row b_i prod_{j != i} a_j with a_j = <phi_j|psi_j> and
    b_i = <phi_i|psi_j^perp>.

    Parameters:
    ----------
    g: InteractionGraph
        Instance graph.
    projectors: ProjectorSet
        Product projectors.
    state: ProductState
        Zero-energy product state.

    Returns:
    -------
    modes: ModeMatrix
    """
    assert projectors.mode == "product", "Product projectors required."
    assert state.n_qubits == g.n_qubits, "State does not match the graph."
    constraints = np.zeros((g.n_clauses, g.n_qubits), dtype=np.complex128)
    perp = _perpendicular(state.states)

    for m, clause in enumerate(g.clauses):
        phi = projectors.vectors[m]
        a = np.array([np.vdot(phi[j], state.states[q])
                      for j, q in enumerate(clause)])
        b = np.array([np.vdot(phi[j], perp[q]) for j, q in enumerate(clause)])
        if abs(np.prod(a)) > 1e-10:
            warnings.warn(f"Clause {m} is violated by the state.", RuntimeWarning)
        for j, q in enumerate(clause):
            constraints[m, q] = b[j] * np.prod(np.delete(a, j))

    if g.n_clauses:
        singular = np.linalg.svd(constraints, compute_uv=False)
        rank = int(np.sum(singular > MODE_RANK_TOL * max(singular[0], 1.0)))
        kernel = null_space(constraints, rcond=MODE_RANK_TOL)
    else:
        rank, kernel = 0, np.eye(g.n_qubits, dtype=np.complex128)
    if rank < g.n_clauses:
        warnings.warn(
            f"Linearized constraints have rank {rank} < {g.n_clauses}; "
            "instance is not generic.", RuntimeWarning
        )

    clause_graph = nx.Graph()
    clause_graph.add_nodes_from(range(g.n_qubits))
    for clause in g.clauses:
        nx.add_path(clause_graph, clause)
    components = nx.number_connected_components(clause_graph)
    if components > 1:
        warnings.warn(
            f"Graph has {components} connected components; modes of separate "
            "clusters are not distinguished.", RuntimeWarning
        )
    return ModeMatrix(kernel.T, constraints, rank, components)


def zero_mode_span_dimension(
        g: InteractionGraph,
        projectors: ProjectorSet,
        state: ProductState,
        modes: ModeMatrix,
        rng=None,
        n_samples: Optional[int] = None,
        scale: float = 1.0,
    ) -> int:
    """
    Numerical dimension of the span of product states moved along the zero
    modes, from the rank of their Gram matrix. Small N only.

    Parameters:
    ----------
    n_samples: int
        Number of sampled states. Default is 2^(d+1) + 4.
    scale: float
        Standard deviation of the complex mode coordinates.
    """
    assert g.n_qubits <= 12, "Span check builds 2^N vectors."
    gen = as_generator(rng)
    n_samples = n_samples or 2 ** (modes.d + 1) + 4
    perp = _perpendicular(state.states)

    vectors = []
    for _ in range(n_samples):
        coords = scale * (gen.standard_normal(modes.d)
                          + 1j * gen.standard_normal(modes.d))
        shift = coords @ modes.w
        local = state.states + shift[:, None] * perp
        local /= np.linalg.norm(local, axis=1, keepdims=True)
        vectors.append(ProductState(local, state.free).vector())

    V = np.array(vectors).T
    gram = V.conj().T @ V
    values = np.linalg.eigvalsh(gram)
    return int(np.sum(values > SPAN_RANK_TOL * values[-1]))


@dataclass(frozen=True)
class EntropyLedger:
    """
    Entropy per qubit of the full graph, in nats. provenance names the
    source of each line; reference holds the rounded literature triple.
    """
    s_core_per_N: float
    s_zero_per_N: float
    s_hair_upper_per_N: float
    s_hair_geometric_per_N: float
    s_free_spin_per_N: float
    provenance: Dict[str, str]
    parameters: Dict[str, float]
    reference: Dict[str, float] = field(
        default_factory=lambda: dict(REFERENCE_LEDGER)
    )

    def __post_init__(self):
        for name in ("s_core_per_N", "s_zero_per_N", "s_hair_upper_per_N",
                     "s_hair_geometric_per_N", "s_free_spin_per_N"):
            assert getattr(self, name) >= 0, f"{name} is negative."

    @property
    def s_total_per_N(self) -> float:
        """Core plus zero-mode hair entropy."""
        return self.s_core_per_N + self.s_zero_per_N

    @property
    def s_total_upper_per_N(self) -> float:
        return self.s_core_per_N + self.s_hair_upper_per_N

    def to_dict(self, units: str = "nats") -> dict:
        assert units in ("nats", "bits"), \
            f"Invalid units {units}. Choose from nats, bits."
        scale = 1.0 if units == "nats" else 1.0 / NATS_PER_BIT
        lines = {
            "s_core_per_N": self.s_core_per_N,
            "s_zero_per_N": self.s_zero_per_N,
            "s_hair_upper_per_N": self.s_hair_upper_per_N,
            "s_hair_geometric_per_N": self.s_hair_geometric_per_N,
            "s_free_spin_per_N": self.s_free_spin_per_N,
            "s_total_per_N": self.s_total_per_N,
            "s_total_upper_per_N": self.s_total_upper_per_N,
        }
        return {
            "units": units,
            "entries": {
                name: {"value": value * scale,
                       "provenance": self.provenance.get(name, "derived")}
                for name, value in lines.items()
            },
            "parameters": dict(self.parameters),
            "reference": {
                "values": {n: v * scale for n, v in self.reference.items()},
                "hair_fraction": REFERENCE_HAIR_FRACTION,
                "gamma": REFERENCE_GAMMA,
                "note": "rounded literature values assume N_h/N = 0.4",
            },
        }


def ledger(
        alpha: float,
        k: int,
        s_core: Optional[float] = None,
        core_provenance: str = "cavity",
        gamma: Optional[float] = None,
    ) -> EntropyLedger:
    """
    Assembles the entropy ledger at clause density alpha.

    Parameters:
    ----------
    alpha: float
        Clause density, above the core threshold.
    k: int
        Clause arity.
    s_core: float
        Core entropy per core qubit. Default is the Pauling estimate.
    core_provenance: str
        Source tag of s_core (cavity or exact).
    gamma: float
        Zero modes per hair qubit. Default is 1 - (M - M_c) / (N - N_c) from
        the core statistics.

    Returns:
    -------
    ledger: EntropyLedger
    """
    stats = core_stats(alpha, k)
    if stats is None:
        raise ParameterInconsistencyError(f"No core at alpha={alpha}, k={k}.")
    nh_frac = 1.0 - stats.nc_frac

    if s_core is None:
        s_core = pauling_estimate(stats.beta, k, stats.degree_law)
        core_provenance = "pauling"
    per_spin, _ = geometric_hair_entropy(1.0, alpha, stats.nc_frac,
                                         stats.mc_frac)
    if gamma is None:
        gamma = 1.0 - (alpha - stats.mc_frac) / nh_frac
    if not 0.0 <= gamma <= 1.0:
        raise ParameterInconsistencyError(f"gamma={gamma} outside [0, 1].")

    return EntropyLedger(
        s_core_per_N=s_core * stats.nc_frac,
        s_zero_per_N=zero_mode_entropy_rate(gamma) * nh_frac,
        s_hair_upper_per_N=nh_frac * math.log(2.0),
        s_hair_geometric_per_N=per_spin * nh_frac,
        s_free_spin_per_N=gamma * math.log(2.0) * nh_frac,
        provenance={
            "s_core_per_N": core_provenance,
            "s_zero_per_N": "exact",
            "s_hair_upper_per_N": "exact",
            "s_hair_geometric_per_N": "exact",
            "s_free_spin_per_N": "exact",
        },
        parameters={
            "alpha": alpha,
            "k": k,
            "nc_frac": stats.nc_frac,
            "nh_frac": nh_frac,
            "gamma": gamma,
            "s_core_per_Nc": s_core,
        },
    )


if __name__ == "__main__":
    pass
