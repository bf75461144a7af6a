from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import networkx as nx

from qsat.hypergraph import InteractionGraph, ProjectorSet
from qsat.enums import FREE_POLICIES
from qsat.utils import run_jobs


class UnsupportedInstanceError(ValueError):
    """Raised when generic projectors induce a cyclic dimer orientation."""


class DegenerateProjectorError(RuntimeError):
    """Raised when the constraint on a dimer qubit vanishes identically."""


@dataclass(frozen=True)
class DimerCovering:
    """
    Dimer assignment clause -> qubit. assignment[a] is the qubit clause a
    covers, or -1 for an uncovered clause (only produced by maximum_covering).
    """
    assignment: Tuple[int, ...]

    def __post_init__(self):
        covered = [q for q in self.assignment if q >= 0]
        if len(set(covered)) != len(covered):
            raise ValueError("A qubit is assigned to two clauses.")

    @property
    def n_uncovered(self) -> int:
        return sum(q < 0 for q in self.assignment)

    def as_dict(self) -> Dict[int, int]:
        return {a: q for a, q in enumerate(self.assignment) if q >= 0}

    def to_pairs(self) -> List[List[int]]:
        return [[a, q] for a, q in self.as_dict().items()]

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[int]], n_clauses: int):
        assignment = [-1] * n_clauses
        for a, q in pairs:
            assignment[a] = q
        return cls(tuple(assignment))

    def validate(self, g: InteractionGraph):
        """Checks that every clause is covered by one of its own qubits."""
        assert len(self.assignment) == g.n_clauses, \
            "Covering does not match the clause count."
        for a, q in enumerate(self.assignment):
            assert q in g.clauses[a], f"Clause {a} is not covered by qubit {q}."


def _incidence(g: InteractionGraph, exclude_qubits: Iterable[int] = ()):
    excluded = set(exclude_qubits)
    bipartite = nx.Graph()
    clause_nodes = [("c", a) for a in range(g.n_clauses)]
    bipartite.add_nodes_from(clause_nodes, bipartite=0)
    bipartite.add_nodes_from(
        (("q", q) for q in range(g.n_qubits) if q not in excluded), bipartite=1
    )
    for a, c in enumerate(g.clauses):
        bipartite.add_edges_from((("c", a), ("q", q)) for q in c
                                 if q not in excluded)
    return bipartite, clause_nodes


def maximum_covering(
        g: InteractionGraph,
        exclude_qubits: Iterable[int] = (),
    ) -> Tuple[DimerCovering, int]:
    """
    Covers as many clauses as possible with distinct qubits (maximum matching
    of the clause-qubit incidence graph).

    Parameters:
    ----------
    g: InteractionGraph
        Graph to cover.
    exclude_qubits: Iterable[int]
        Qubits that may not hold a dimer.

    Returns:
    -------
    covering: DimerCovering
        Uncovered clauses carry -1.
    uncovered: int
        Number of clause-side monomers.
    """
    bipartite, clause_nodes = _incidence(g, exclude_qubits)
    matching = nx.bipartite.hopcroft_karp_matching(bipartite, clause_nodes)
    assignment = tuple(
        matching[("c", a)][1] if ("c", a) in matching else -1
        for a in range(g.n_clauses)
    )
    covering = DimerCovering(assignment)
    return covering, covering.n_uncovered


def has_covering(g: InteractionGraph, exclude_qubits: Iterable[int] = ()) -> bool:
    """True iff every clause can be covered by a distinct qubit."""
    if g.n_clauses > g.n_qubits:
        return False
    return maximum_covering(g, exclude_qubits)[1] == 0


@dataclass
class EnumerationResult:
    """
    Exact number of dimer coverings. count is a Python int; when saturated
    the search stopped after exceeding bound and count is a lower bound.
    """
    count: int
    coverings: List[DimerCovering] = field(default_factory=list)
    saturated: bool = False

    @property
    def log_count(self) -> float:
        return math.log(self.count) if self.count > 0 else float("-inf")

    def to_row(self, instance_id: str, n_c: int, m_c: int) -> dict:
        return {
            "instance_id": instance_id,
            "N_c": n_c,
            "M_c": m_c,
            "count": str(self.count),
            "log_count": self.log_count,
        }


class _Saturated(Exception):
    pass


def _option_masks(g: InteractionGraph) -> List[int]:
    return [sum(1 << q for q in c) for c in g.clauses]


def _pick_clause(options: List[int], assigned: int, used: int):
    """Unassigned clause with the fewest free qubits, lowest index first."""
    best, best_free = -1, None
    for a, mask in enumerate(options):
        if assigned >> a & 1:
            continue
        free = mask & ~used
        n_free = bin(free).count("1")
        if best_free is None or n_free < bin(best_free).count("1"):
            best, best_free = a, free
            if n_free == 0:
                break
    return best, best_free


def _count_from(
        options: List[int],
        assigned: int,
        used: int,
        bound: Optional[int],
    ) -> int:
    full = (1 << len(options)) - 1
    memo = {}

    def count(assigned, used):
        if assigned == full:
            return 1
        key = (assigned, used)
        if key in memo:
            return memo[key]
        a, free = _pick_clause(options, assigned, used)
        total = 0
        while free:
            bit = free & -free
            free ^= bit
            total += count(assigned | 1 << a, used | bit)
            if bound is not None and total > bound:
                raise _Saturated(total)
        memo[key] = total
        return total

    return count(assigned, used)


def _list_from(
        options: List[int],
        cap: int,
    ) -> List[Tuple[int, ...]]:
    full = (1 << len(options)) - 1
    assignment = [-1] * len(options)
    found = []

    def walk(assigned, used):
        if len(found) >= cap:
            return
        if assigned == full:
            found.append(tuple(assignment))
            return
        a, free = _pick_clause(options, assigned, used)
        while free:
            bit = free & -free
            free ^= bit
            assignment[a] = bit.bit_length() - 1
            walk(assigned | 1 << a, used | bit)
        assignment[a] = -1

    walk(0, 0)
    return found


def enumerate_coverings(
        g: InteractionGraph,
        cap: int = 0,
        bound: Optional[int] = None,
        n_jobs: int = 1,
        progress: bool = False,
    ) -> EnumerationResult:
    """
    Exact count of dimer coverings by backtracking over clauses, most
    constrained clause first. Partial assignments are memoized on the sets of
    assigned clauses and used qubits.

    Parameters:
    ----------
    g: InteractionGraph
        Graph to enumerate.
    cap: int
        Number of coverings to list alongside the count.
    bound: int
        Stop once the count exceeds this value and flag saturation.
    n_jobs: int
        Splits the branches of the first clause over workers.

    Returns:
    -------
    result: EnumerationResult
    """
    if g.n_clauses == 0:
        return EnumerationResult(1, [DimerCovering(())] if cap else [])
    if g.n_clauses > g.n_qubits:
        return EnumerationResult(0)

    options = _option_masks(g)
    a, free = _pick_clause(options, 0, 0)
    branches = []
    while free:
        bit = free & -free
        free ^= bit
        branches.append((options, 1 << a, bit, bound))

    saturated = False
    if n_jobs == 1 or len(branches) == 1:
        try:
            count = sum(_count_from(*branch) for branch in branches)
        except _Saturated as e:
            count, saturated = e.args[0], True
    else:
        results = run_jobs(_count_branch, branches, n_jobs,
                           "Enumerating coverings", progress)
        if any(not r.ok for r in results):
            raise RuntimeError("Enumeration branch failed.")
        count = sum(r.value[0] for r in results)
        saturated = any(r.value[1] for r in results)

    if bound is not None and count > bound:
        saturated = True
    if saturated:
        warnings.warn(
            f"Covering count exceeded bound {bound}; count is a lower bound.",
            RuntimeWarning
        )

    coverings = []
    if cap:
        coverings = [DimerCovering(c) for c in _list_from(options, cap)]
    return EnumerationResult(count, coverings, saturated)


def _count_branch(options, assigned, used, bound):
    try:
        return _count_from(options, assigned, used, bound), False
    except _Saturated as e:
        return e.args[0], True


@dataclass(frozen=True)
class LoopStructure:
    """
    Components of the symmetric difference of two coverings. Loops and paths
    are sequences of ("c", clause) / ("q", qubit) nodes.
    """
    loops: Tuple[Tuple[tuple, ...], ...]
    paths: Tuple[Tuple[tuple, ...], ...]
    total_length: int
    n_qubits: int


def _walk_component(sub: nx.Graph) -> Tuple[tuple, ...]:
    ends = sorted(n for n, d in sub.degree() if d == 1)
    start = ends[0] if ends else min(sub.nodes)
    order = [start]
    previous, node = None, start
    while True:
        step = sorted(n for n in sub.neighbors(node) if n != previous)
        if not step or step[0] == start:
            break
        previous, node = node, step[0]
        order.append(node)
    return tuple(order)


def loop_structure(dc1: DimerCovering, dc2: DimerCovering) -> LoopStructure:
    """
    Superposes two coverings of the same graph and splits the symmetric
    difference of their dimer edges into alternating cycles and open paths.
    """
    assert len(dc1.assignment) == len(dc2.assignment), \
        "Coverings belong to different graphs."
    edges1 = {(("c", a), ("q", q)) for a, q in dc1.as_dict().items()}
    edges2 = {(("c", a), ("q", q)) for a, q in dc2.as_dict().items()}
    difference = nx.Graph()
    difference.add_edges_from(edges1 ^ edges2)

    loops, paths = [], []
    for nodes in nx.connected_components(difference):
        sub = difference.subgraph(nodes)
        walk = _walk_component(sub)
        if all(d == 2 for _, d in sub.degree()):
            loops.append(walk)
        else:
            paths.append(walk)

    n_qubits = sum(1 for n in difference.nodes if n[0] == "q")
    return LoopStructure(
        tuple(sorted(loops)), tuple(sorted(paths)),
        difference.number_of_edges(), n_qubits,
    )


@dataclass(frozen=True, eq=False)
class ProductState:
    """
    Single-qubit states of a product state. free marks qubits not pinned by a
    dimer; their stored vector is a placeholder used for energy evaluation.
    """
    states: np.ndarray = field(repr=False)
    free: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.complex128)
        free = np.asarray(self.free, dtype=bool)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "free", free)
        assert states.shape == (len(free), 2), "States must be (N, 2)."
        norms = np.linalg.norm(states[~free], axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("Assigned qubit states must have unit norm.")

    @property
    def n_qubits(self) -> int:
        return len(self.free)

    def vector(self) -> np.ndarray:
        """Full 2^N amplitude vector, qubit 0 most significant."""
        out = np.ones(1, dtype=np.complex128)
        for psi in self.states:
            out = np.multiply.outer(out, psi).ravel()
        return out


def _orthogonal(v: np.ndarray) -> np.ndarray:
    return np.array([-np.conj(v[1]), np.conj(v[0])])


def build_product_state(
        g: InteractionGraph,
        projectors: ProjectorSet,
        dc: DimerCovering,
    ) -> ProductState:
    """
    Zero-energy product state attached to a dimer covering. Each dimer qubit
    is chosen orthogonal to what its clause projects onto.

    Parameters:
    ----------
    g: InteractionGraph
        Graph of the instance.
    projectors: ProjectorSet
        Product projectors, or generic projectors whose covering induces an
        acyclic orientation.
    dc: DimerCovering
        Covering of every clause.

    Returns:
    -------
    state: ProductState
        Undimered qubits are free and hold |0>.

    Raises:
    -------
    UnsupportedInstanceError:
        Generic projectors with a cyclic orientation.
    DegenerateProjectorError:
        The constraint on a dimer qubit vanishes.
    """
    assert projectors.n_clauses == g.n_clauses, \
        "Projector count does not match the clause count."
    dc.validate(g)
    states = np.zeros((g.n_qubits, 2), dtype=np.complex128)
    states[:, 0] = 1.0
    free = np.ones(g.n_qubits, dtype=bool)

    if projectors.mode == "product":
        for a, q in dc.as_dict().items():
            position = g.clauses[a].index(q)
            states[q] = _orthogonal(projectors.vectors[a, position])
            free[q] = False
        return ProductState(states, free)

    owner = {q: a for a, q in dc.as_dict().items()}
    orientation = nx.DiGraph()
    orientation.add_nodes_from(range(g.n_qubits))
    for q, a in owner.items():
        orientation.add_edges_from((p, q) for p in g.clauses[a] if p != q)
    try:
        order = list(nx.topological_sort(orientation))
    except nx.NetworkXUnfeasible:
        raise UnsupportedInstanceError(
            "Generic projectors with a cyclic dimer orientation."
        )

    for q in order:
        if q not in owner:
            continue
        a = owner[q]
        clause = g.clauses[a]
        position = clause.index(q)
        t = np.conj(projectors.vectors[a]).reshape((2,) * g.k)
        for j in reversed(range(g.k)):
            if j != position:
                t = np.tensordot(t, states[clause[j]], axes=([j], [0]))
        norm = np.linalg.norm(t)
        if norm < 1e-12:
            raise DegenerateProjectorError(
                f"Constraint of clause {a} vanishes on qubit {q}."
            )
        states[q] = np.array([t[1], -t[0]]) / norm
        free[q] = False
    return ProductState(states, free)


def product_state_energy(
        g: InteractionGraph,
        projectors: ProjectorSet,
        state: ProductState,
    ) -> float:
    """<Psi|H|Psi> of a product state, without the 2^N vector."""
    if g.n_clauses == 0:
        return 0.0
    local = state.states[np.asarray(g.clauses)]
    amplitudes = np.ones((g.n_clauses, 1), dtype=np.complex128)
    for j in range(g.k):
        amplitudes = (amplitudes[:, :, None] * local[:, j, None, :]) \
            .reshape(g.n_clauses, -1)
    overlaps = np.sum(np.conj(projectors.clause_vectors()) * amplitudes, axis=1)
    return float(np.sum(np.abs(overlaps) ** 2))


def log_overlap(
        s1: ProductState,
        s2: ProductState,
        free_policy: str = "exclude",
    ) -> float:
    """
    Natural log of |<s1|s2>| as a sum over sites. With free_policy exclude
    only sites assigned in both states are compared.
    """
    assert free_policy in FREE_POLICIES, \
        f"Invalid free policy {free_policy}. Choose from exclude, include."
    assert s1.n_qubits == s2.n_qubits, "States have different qubit counts."
    sites = np.ones(s1.n_qubits, dtype=bool)
    if free_policy == "exclude":
        sites = ~(s1.free | s2.free)
    factors = np.abs(np.sum(np.conj(s1.states[sites]) * s2.states[sites], axis=1))
    if np.any(factors == 0.0):
        return float("-inf")
    return float(np.sum(np.log(factors)))


def overlap_decay_rate(pairs: Iterable[Tuple[float, LoopStructure]]) -> float:
    """
    Pooled decay rate of the overlap: sum of log-overlaps over the sum of
    rearranged qubits. Orthogonal pairs are skipped.
    """
    total_log, total_qubits = 0.0, 0
    for value, loops in pairs:
        if not np.isfinite(value) or loops.n_qubits == 0:
            continue
        total_log += value
        total_qubits += loops.n_qubits
    assert total_qubits > 0, "No rearranged qubits in the given pairs."
    return total_log / total_qubits


def finite_size_extrapolation(
        n_c: Sequence[int],
        s: Sequence[float],
    ) -> Tuple[float, float]:
    """
    Linear fit of the entropy density against 1/N_c.

    Returns:
    -------
    intercept, slope: float
        intercept is the N_c -> infinity estimate.
    """
    assert len(n_c) == len(s) >= 2, "Need at least two sizes."
    slope, intercept = np.polyfit(1.0 / np.asarray(n_c, dtype=float),
                                  np.asarray(s, dtype=float), 1)
    return float(intercept), float(slope)


if __name__ == "__main__":
    pass
