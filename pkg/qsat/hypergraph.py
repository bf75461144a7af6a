from typing import Dict, List, Optional, Sequence, Tuple

import math
from itertools import combinations
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from qsat.enums import INSTANCE_VERSION, PROJECTOR_MODES
from qsat.utils import RngSpec, as_generator, read_json, write_json


class InfeasibleEnsembleError(ValueError):
    """Raised when more distinct clauses are requested than exist."""


@dataclass(frozen=True)
class InteractionGraph:
    """
    Random k-QSAT interaction graph: n_qubits qubits and an ordered sequence
    of distinct k-subsets (clauses). Clauses are stored as sorted tuples.
    """
    n_qubits: int
    k: int
    clauses: Tuple[Tuple[int, ...], ...] = ()

    def __post_init__(self):
        clauses = tuple(tuple(sorted(int(q) for q in c)) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)

        assert self.k >= 1, "Clause arity must be positive."
        for c in clauses:
            if len(c) != self.k or len(set(c)) != self.k:
                raise ValueError(f"Clause {c} does not have {self.k} qubits.")
            if c[0] < 0 or c[-1] >= self.n_qubits:
                raise ValueError(f"Clause {c} out of range [0, {self.n_qubits}).")
        if len(set(clauses)) != len(clauses):
            raise ValueError("Clauses must be pairwise distinct.")

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    @property
    def alpha(self) -> float:
        return self.n_clauses / self.n_qubits if self.n_qubits else 0.0

    @property
    def degrees(self) -> np.ndarray:
        if not self.clauses:
            return np.zeros(self.n_qubits, dtype=np.int64)
        flat = np.asarray(self.clauses, dtype=np.int64).ravel()
        return np.bincount(flat, minlength=self.n_qubits)

    def qubit_clauses(self) -> List[List[int]]:
        """For every qubit, the indices of the clauses containing it."""
        adjacency = [[] for _ in range(self.n_qubits)]
        for a, c in enumerate(self.clauses):
            for q in c:
                adjacency[q].append(a)
        return adjacency

    def induced(
            self,
            clause_ids: Sequence[int],
            qubits: Sequence[int] = None,
        ) -> Tuple["InteractionGraph", Dict[int, int]]:
        """
        Subgraph on the given clauses, relabelled to compact qubit indices.

        Parameters:
        ----------
        clause_ids: Sequence[int]
            Clauses to keep, in the order they should appear.
        qubits: Sequence[int]
            Qubits to keep. Default is the qubits touched by the clauses.

        Returns:
        -------
        graph: InteractionGraph
            The relabelled subgraph.
        qubit_map: Dict[int, int]
            Old qubit index -> new qubit index.
        """
        if qubits is None:
            qubits = sorted({q for a in clause_ids for q in self.clauses[a]})
        qubit_map = {q: i for i, q in enumerate(sorted(qubits))}
        clauses = [
            tuple(qubit_map[q] for q in self.clauses[a]) for a in clause_ids
        ]
        return InteractionGraph(len(qubit_map), self.k, tuple(clauses)), \
            qubit_map

    def with_clauses(self, extra: Sequence[Sequence[int]]) -> "InteractionGraph":
        """Returns a copy with additional clauses appended."""
        return InteractionGraph(
            self.n_qubits, self.k, self.clauses + tuple(tuple(c) for c in extra)
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n_qubits,
            "k": self.k,
            "clauses": [list(c) for c in self.clauses],
        }


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """
    One rank-1 projector per clause. Generic mode stores an (M, 2^k) array
    of clause amplitudes, product mode an (M, k, 2) array of single-qubit
    states whose tensor product is the projected state. Clause amplitudes
    use the clause's sorted qubit order, first qubit most significant.
    """
    mode: str
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        assert self.mode in PROJECTOR_MODES, \
            f"Invalid projector mode {self.mode}. Choose from generic, product."
        vectors = np.asarray(self.vectors, dtype=np.complex128)
        object.__setattr__(self, "vectors", vectors)
        if vectors.size:
            norms = np.linalg.norm(vectors, axis=-1)
            if np.max(np.abs(norms - 1.0)) > 1e-12:
                raise ValueError("Projector vectors must have unit norm.")

    @property
    def n_clauses(self) -> int:
        return self.vectors.shape[0]

    def clause_vectors(self) -> np.ndarray:
        """Returns the (M, 2^k) clause amplitudes for either mode."""
        if self.mode == "generic":
            return self.vectors
        m, k, _ = self.vectors.shape
        out = np.ones((m, 1), dtype=np.complex128)
        for j in range(k):
            out = (out[:, :, None] * self.vectors[:, j, None, :]).reshape(m, -1)
        return out

    def subset(self, clause_ids: Sequence[int]) -> "ProjectorSet":
        return ProjectorSet(self.mode, self.vectors[list(clause_ids)])

    def to_dict(self) -> dict:
        amplitudes = np.stack([self.vectors.real, self.vectors.imag], axis=-1)
        return {"mode": self.mode, "amplitudes": amplitudes.tolist()}

    @classmethod
    def from_dict(cls, data: dict, k: int) -> "ProjectorSet":
        amplitudes = np.asarray(data["amplitudes"], dtype=np.float64)
        if amplitudes.size == 0:
            shape = (0, 2 ** k) if data["mode"] == "generic" else (0, k, 2)
            return cls(data["mode"], np.zeros(shape, dtype=np.complex128))
        return cls(data["mode"], amplitudes[..., 0] + 1j * amplitudes[..., 1])


def sample_er_graph(
        n: int,
        m: int,
        k: int,
        rng: RngSpec,
    ) -> InteractionGraph:
    """
    Samples m distinct k-subsets of n qubits uniformly without replacement
    (fixed-M Erdos-Renyi ensemble).

    Parameters:
    ----------
    n: int
        Number of qubits.
    m: int
        Number of clauses.
    k: int
        Clause arity, at least 2.
    rng: RngSpec
        Random stream.

    Returns:
    -------
    g: InteractionGraph
        The sampled graph.

    Raises:
    -------
    InfeasibleEnsembleError:
        If m exceeds C(n, k).
    """
    assert k >= 2, "Clause arity must be at least 2."
    assert m >= 0 and n >= 0, "n and m must be non-negative."
    total = math.comb(n, k)
    if m > total:
        raise InfeasibleEnsembleError(
            f"Cannot place {m} distinct {k}-clauses on {n} qubits "
            f"(only {total} exist)."
        )
    gen = as_generator(rng)
    if m == 0:
        return InteractionGraph(n, k, ())

    # Dense regime: enumerate all subsets and choose directly
    if total <= max(10_000, 4 * m):
        subsets = list(combinations(range(n), k))
        chosen = gen.choice(total, size=m, replace=False)
        return InteractionGraph(n, k, tuple(subsets[i] for i in chosen))

    # Sparse regime: sequential rejection of repeated qubits and clauses
    seen = set()
    clauses = []
    while len(clauses) < m:
        batch = gen.integers(0, n, size=(2 * (m - len(clauses)) + 16, k))
        batch.sort(axis=1)
        valid = np.all(np.diff(batch, axis=1) > 0, axis=1)
        for row in batch[valid]:
            c = tuple(int(q) for q in row)
            if c in seen:
                continue
            seen.add(c)
            clauses.append(c)
            if len(clauses) == m:
                break

    return InteractionGraph(n, k, tuple(clauses))


def haar_states(gen: np.random.Generator, shape: tuple, dim: int) -> np.ndarray:
    """Haar-random unit vectors in C^dim, normalized complex Gaussians."""
    z = gen.standard_normal(shape + (dim,)) \
        + 1j * gen.standard_normal(shape + (dim,))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def haar_qubits(rng, size: int) -> np.ndarray:
    """Returns a (size, 2) array of Haar-random single-qubit states."""
    return haar_states(as_generator(rng), (size,), 2)


def sample_projectors(
        g: InteractionGraph,
        mode: str,
        rng: RngSpec,
    ) -> ProjectorSet:
    """
    Draws one Haar-random projector per clause.

    Parameters:
    ----------
    g: InteractionGraph
        Graph whose clauses receive projectors.
    mode: str
        generic: a Haar state of the 2^k-dimensional clause space.
        product: k independent Haar single-qubit states per clause.
    rng: RngSpec
        Random stream.

    Returns:
    -------
    projectors: ProjectorSet
    """
    assert mode in PROJECTOR_MODES, \
        f"Invalid projector mode {mode}. Choose from generic, product."
    gen = as_generator(rng)
    if mode == "generic":
        vectors = haar_states(gen, (g.n_clauses,), 2 ** g.k)
    else:
        vectors = haar_states(gen, (g.n_clauses, g.k), 2)
    return ProjectorSet(mode, vectors)


def find_minifans(g: InteractionGraph) -> List[Tuple[int, int]]:
    """
    Returns the unordered clause pairs (i < j) sharing at least two qubits.
    """
    by_pair = defaultdict(list)
    for a, c in enumerate(g.clauses):
        for pair in combinations(c, 2):
            by_pair[pair].append(a)

    fans = set()
    for clause_ids in by_pair.values():
        for pair in combinations(clause_ids, 2):
            fans.add(pair)
    return sorted(fans)


def degree_histogram(g: InteractionGraph) -> Dict[int, int]:
    """Exact histogram degree -> number of qubits with that degree."""
    counts = np.bincount(g.degrees) if g.n_qubits else np.zeros(0, int)
    return {d: int(c) for d, c in enumerate(counts) if c > 0}


def poisson_tv_distance(histogram: Dict[int, int], mean: float) -> float:
    """
    Total-variation distance between an empirical degree histogram and the
    Poisson law with the given mean.
    """
    total = sum(histogram.values())
    assert total > 0, "Empty histogram."
    d_max = max(max(histogram), int(mean + 20 * math.sqrt(mean + 1)))
    degrees = np.arange(d_max + 1)
    empirical = np.array([histogram.get(d, 0) for d in degrees]) / total
    expected = poisson.pmf(degrees, mean)
    tail = poisson.sf(d_max, mean)
    return 0.5 * (np.abs(empirical - expected).sum() + tail)


def save_instance(
        path: str,
        g: InteractionGraph,
        projectors: Optional[ProjectorSet] = None,
        rng: Optional[RngSpec] = None,
        core: Optional[dict] = None,
    ) -> str:
    """
    Writes an instance as a self-describing JSON document.

    Parameters:
    ----------
    path: str
        Output path.
    g: InteractionGraph
        The graph.
    projectors: ProjectorSet
        Optional projector realization.
    rng: RngSpec
        Stream the instance was drawn from.
    core: dict
        Optional serialized CoreDecomposition.
    """
    doc = {"version": INSTANCE_VERSION}
    doc.update(g.to_dict())
    if projectors is not None:
        doc["projectors"] = projectors.to_dict()
    if rng is not None:
        doc["rng"] = rng.to_dict()
    if core is not None:
        doc["core"] = core
    return write_json(doc, path)


def load_instance(path: str) -> dict:
    """
    Reads an instance file.

    Returns:
    -------
    instance: dict
        Keys graph (InteractionGraph), projectors (ProjectorSet or None),
        rng (RngSpec or None) and core (dict or None).
    """
    doc = read_json(path)
    if doc.get("version") != INSTANCE_VERSION:
        raise ValueError(f"Unsupported instance version {doc.get('version')}.")
    g = InteractionGraph(doc["n"], doc["k"], tuple(map(tuple, doc["clauses"])))
    projectors = None
    if "projectors" in doc:
        projectors = ProjectorSet.from_dict(doc["projectors"], g.k)
        assert projectors.n_clauses == g.n_clauses, \
            "Projector count does not match the clause count."
    rng = RngSpec(**doc["rng"]) if "rng" in doc else None
    return {"graph": g, "projectors": projectors, "rng": rng,
            "core": doc.get("core")}


if __name__ == "__main__":
    pass
