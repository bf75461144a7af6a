from typing import Callable, List, Optional, Sequence, Tuple

import math
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
import networkx as nx
import polars as pl
from scipy.optimize import brentq
from scipy.stats import poisson

from qsat.enums import (
    LAMBDA_STAR_TOL, LAMBDA_STAR_SCAN_POINTS, LAMBDA_STAR_SCAN_MIN,
    DEGREE_LAW_TAIL, CORE_STATS_COLUMNS, CORE_SAMPLE_COLUMNS,
    DEFAULT_MAX_ATTEMPTS,
)
from qsat.hypergraph import InteractionGraph, sample_er_graph
from qsat.utils import RngSpec, as_generator, run_jobs, rows_to_frame


@dataclass(frozen=True)
class CoreDecomposition:
    """
    Partition of qubits and clauses into core and hair. removal_trace lists
    the leaf-removal steps as (qubit, clause) pairs; clause is -1 when an
    isolated qubit was removed on its own.
    """
    core_qubits: Tuple[int, ...]
    core_clauses: Tuple[int, ...]
    hair_qubits: Tuple[int, ...]
    hair_clauses: Tuple[int, ...]
    removal_trace: Tuple[Tuple[int, int], ...]

    @property
    def n_core(self) -> int:
        return len(self.core_qubits)

    @property
    def m_core(self) -> int:
        return len(self.core_clauses)

    @property
    def n_hair(self) -> int:
        return len(self.hair_qubits)

    @property
    def beta(self) -> float:
        return self.m_core / self.n_core if self.n_core else float("nan")

    def core_graph(self, g: InteractionGraph):
        """Core as a relabelled InteractionGraph plus the qubit map."""
        return g.induced(self.core_clauses, self.core_qubits)

    def to_dict(self) -> dict:
        return {
            "core_qubits": list(self.core_qubits),
            "core_clauses": list(self.core_clauses),
            "hair_qubits": list(self.hair_qubits),
            "hair_clauses": list(self.hair_clauses),
            "removal_trace": [list(step) for step in self.removal_trace],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoreDecomposition":
        return cls(
            tuple(data["core_qubits"]), tuple(data["core_clauses"]),
            tuple(data["hair_qubits"]), tuple(data["hair_clauses"]),
            tuple(tuple(step) for step in data["removal_trace"]),
        )


def strip_core(g: InteractionGraph, rng=None) -> CoreDecomposition:
    """
    Leaf removal: recursively removes qubits of degree one together with
    their clause, and isolated qubits, until every remaining qubit has degree
    at least two. The 2-core is unique, so the order only changes the trace.

    Parameters:
    ----------
    g: InteractionGraph
        Graph to strip.
    rng: RngSpec, Generator or int
        If given, pending leaves are processed in random order instead of
        FIFO.

    Returns:
    -------
    decomposition: CoreDecomposition
    """
    adjacency = g.qubit_clauses()
    degree = [len(a) for a in adjacency]
    clause_alive = [True] * g.n_clauses
    qubit_alive = [True] * g.n_qubits
    gen = as_generator(rng) if rng is not None else None

    pending = [q for q in range(g.n_qubits) if degree[q] <= 1]
    queue = deque(pending)
    trace = []

    while queue:
        if gen is not None:
            # Swap a random entry to the front
            j = int(gen.integers(len(queue)))
            queue[0], queue[j] = queue[j], queue[0]
        q = queue.popleft()
        if not qubit_alive[q]:
            continue
        removed_clause = -1
        if degree[q] == 1:
            removed_clause = next(a for a in adjacency[q] if clause_alive[a])
            clause_alive[removed_clause] = False
            for p in g.clauses[removed_clause]:
                degree[p] -= 1
                if p != q and qubit_alive[p] and degree[p] == 1:
                    queue.append(p)
        qubit_alive[q] = False
        trace.append((q, removed_clause))

    core_qubits = tuple(q for q in range(g.n_qubits) if qubit_alive[q])
    hair_qubits = tuple(q for q in range(g.n_qubits) if not qubit_alive[q])
    core_clauses = tuple(a for a in range(g.n_clauses) if clause_alive[a])
    hair_clauses = tuple(a for a in range(g.n_clauses) if not clause_alive[a])

    return CoreDecomposition(
        core_qubits, core_clauses, hair_qubits, hair_clauses, tuple(trace)
    )


def replay_trace(
        g: InteractionGraph,
        trace: Sequence[Tuple[int, int]],
    ) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """
    Replays a removal trace on the full graph, checking that every step
    removes a qubit of degree at most one (with its only live clause).

    Returns:
    -------
    core_qubits, core_clauses: Tuple[int, ...]
        What remains after the trace.
    """
    adjacency = g.qubit_clauses()
    clause_alive = [True] * g.n_clauses
    qubit_alive = [True] * g.n_qubits

    for q, a in trace:
        assert qubit_alive[q], f"Qubit {q} removed twice."
        live = [b for b in adjacency[q] if clause_alive[b]]
        if a == -1:
            assert not live, f"Qubit {q} still has clauses {live}."
        else:
            assert live == [a], f"Qubit {q} is not a leaf of clause {a}."
            clause_alive[a] = False
        qubit_alive[q] = False

    core_qubits = tuple(q for q in range(g.n_qubits) if qubit_alive[q])
    core_clauses = tuple(a for a in range(g.n_clauses) if clause_alive[a])
    return core_qubits, core_clauses


def hair_components(
        g: InteractionGraph,
        decomposition: CoreDecomposition,
    ) -> List[List[int]]:
    """
    Connected components of the hair, as sorted lists of hair qubits. Two hair
    qubits are connected when they share a hair clause.
    """
    hair = nx.Graph()
    hair.add_nodes_from(decomposition.hair_qubits)
    for a in decomposition.hair_clauses:
        qubits = [q for q in g.clauses[a] if q in hair]
        nx.add_path(hair, qubits)
    return sorted(sorted(c) for c in nx.connected_components(hair))


@dataclass(frozen=True)
class DegreeLaw:
    """
    Qubit-degree law of a core ensemble: a Poisson law with parameter c
    truncated to degrees >= d_min, or a regular law (all degrees equal d).
    """
    kind: str
    param: float
    d_min: int = 2

    @classmethod
    def truncated_poisson(cls, c: float, d_min: int = 2) -> "DegreeLaw":
        assert c > 0, "Poisson parameter must be positive."
        return cls("poisson", float(c), d_min)

    @classmethod
    def regular(cls, d: int) -> "DegreeLaw":
        assert d >= 1, "Regular degree must be positive."
        return cls("regular", float(d), int(d))

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        """Degrees with non-negligible mass and their normalized pmf."""
        if self.kind == "regular":
            return np.array([int(self.param)]), np.array([1.0])
        d_max = int(poisson.isf(DEGREE_LAW_TAIL, self.param)) + 2
        degrees = np.arange(self.d_min, max(d_max, self.d_min + 1) + 1)
        pmf = poisson.pmf(degrees, self.param)
        return degrees, pmf / pmf.sum()

    def mean(self) -> float:
        degrees, pmf = self.support()
        return float(np.dot(degrees, pmf))

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        """Degrees of core qubits."""
        degrees, pmf = self.support()
        return gen.choice(degrees, size=size, p=pmf)

    def sample_excess(self, gen: np.random.Generator, size: int) -> np.ndarray:
        """
        Number of other bonds of a qubit reached along a bond: the degree is
        drawn from the size-biased law d·P(d)/E[d], minus one.
        """
        degrees, pmf = self.support()
        biased = degrees * pmf
        return gen.choice(degrees, size=size, p=biased / biased.sum()) - 1


@dataclass(frozen=True)
class CoreStats:
    """Analytic core statistics of the random k-QSAT ensemble."""
    alpha: float
    k: int
    lambda_star: float
    nc_frac: float
    mc_frac: float
    beta: float
    degree_law: DegreeLaw

    def to_row(self) -> dict:
        return {
            "alpha": self.alpha,
            "lambda_star": self.lambda_star,
            "nc_frac": self.nc_frac,
            "mc_frac": self.mc_frac,
            "beta": self.beta,
        }


def _core_equation(c: float, alpha: float, k: int) -> float:
    return math.exp(-c) - 1.0 + (c / (k * alpha)) ** (1.0 / (k - 1))


def lambda_star(alpha: float, k: int) -> Optional[float]:
    """
    Largest positive root of exp(-c) - 1 + (c / (k alpha))^(1/(k-1)) = 0.

    Parameters:
    ----------
    alpha: float
        Clause density, positive.
    k: int
        Clause arity, at least 2.

    Returns:
    -------
    c: float or None
        The root, or None when there is no core (no positive root).
    """
    assert alpha > 0, "Clause density must be positive."
    assert k >= 2, "Clause arity must be at least 2."

    grid = np.linspace(LAMBDA_STAR_SCAN_MIN, 10 * k * alpha,
                       LAMBDA_STAR_SCAN_POINTS)
    values = np.exp(-grid) - 1.0 + (grid / (k * alpha)) ** (1.0 / (k - 1))

    # Scan from the right for the last sign change
    for i in range(len(grid) - 1, 0, -1):
        if values[i - 1] == 0.0:
            return float(grid[i - 1])
        if values[i - 1] < 0.0 <= values[i]:
            return float(brentq(
                _core_equation, grid[i - 1], grid[i], args=(alpha, k),
                xtol=LAMBDA_STAR_TOL, rtol=4 * np.finfo(float).eps,
            ))
    return None


def core_stats(alpha: float, k: int) -> Optional[CoreStats]:
    """
    Core fractions N_c/N, M_c/N, the core density beta and the truncated
    Poisson degree law at clause density alpha. None below the core
    threshold.
    """
    c = lambda_star(alpha, k)
    if c is None:
        return None
    nc_frac = 1.0 - (1.0 + c) * math.exp(-c)
    mc_frac = (c / k) * (1.0 - math.exp(-c))
    return CoreStats(
        alpha=float(alpha), k=k, lambda_star=c, nc_frac=nc_frac,
        mc_frac=mc_frac, beta=mc_frac / nc_frac,
        degree_law=DegreeLaw.truncated_poisson(c),
    )


def core_stats_table(alphas: Sequence[float], k: int) -> pl.DataFrame:
    """CSV-ready rows (alpha, lambda_star, nc_frac, mc_frac, beta)."""
    rows = []
    for alpha in alphas:
        stats = core_stats(alpha, k)
        if stats is None:
            warnings.warn(f"No core at alpha={alpha}, k={k}.", RuntimeWarning)
            continue
        rows.append(stats.to_row())
    return rows_to_frame(rows, CORE_STATS_COLUMNS)


def degree_law_for_beta(beta: float, k: int) -> DegreeLaw:
    """
    Truncated Poisson law (degrees >= 2) whose mean equals k·beta, i.e. the
    core ensemble at clause density beta.
    """
    target = k * beta
    assert target > 2.0, "Core density must exceed 2/k."

    def mean_gap(c):
        return c * (1.0 - math.exp(-c)) / (1.0 - (1.0 + c) * math.exp(-c)) \
            - target

    c = brentq(mean_gap, 1e-8, 10.0 * target + 10.0, xtol=1e-14)
    return DegreeLaw.truncated_poisson(c)


def _strip_sample(n: int, m: int, k: int, rng: RngSpec) -> dict:
    g = sample_er_graph(n, m, k, rng)
    decomposition = strip_core(g)
    core_degree_sum = sum(len(g.clauses[a]) for a in decomposition.core_clauses)
    # Handshake: degrees counted from the qubit side must agree
    core_set = set(decomposition.core_clauses)
    adjacency = g.qubit_clauses()
    qubit_side = sum(
        sum(1 for a in adjacency[q] if a in core_set)
        for q in decomposition.core_qubits
    )
    assert qubit_side == core_degree_sum == k * decomposition.m_core, \
        "Handshake identity violated on the core."
    return {
        "sample": rng.stream,
        "n": n,
        "m": m,
        "n_core": decomposition.n_core,
        "m_core": decomposition.m_core,
        "nc_frac": decomposition.n_core / n,
        "mc_frac": decomposition.m_core / n,
        "degree_sum_core": qubit_side,
    }


def empirical_vs_analytic(
        alpha: float,
        k: int,
        n: int,
        samples: int,
        rng: RngSpec,
        n_jobs: int = 1,
        progress: bool = False,
    ) -> dict:
    """
    Strips sampled graphs with m = round(alpha n) clauses and compares the
    mean core fractions with the analytic CoreStats.

    Parameters:
    ----------
    alpha: float
        Clause density.
    k: int
        Clause arity.
    n: int
        Number of qubits per sample.
    samples: int
        Number of sampled graphs.
    rng: RngSpec
        Master stream; sample i uses stream i.
    n_jobs: int
        Number of parallel jobs.

    Returns:
    -------
    comparison: dict
        table (per-sample pl.DataFrame), mean_nc_frac, mean_mc_frac, and the
        analytic nc_frac, mc_frac, beta (None below threshold).
    """
    m = int(round(alpha * n))
    jobs = [(n, m, k, rng.child(i)) for i in range(samples)]
    results = run_jobs(_strip_sample, jobs, n_jobs, "Stripping cores", progress)
    rows = [r.value for r in results if r.ok]
    table = rows_to_frame(rows, CORE_SAMPLE_COLUMNS)

    stats = core_stats(alpha, k)
    return {
        "table": table,
        "mean_nc_frac": float(table["nc_frac"].mean()) if rows else None,
        "mean_mc_frac": float(table["mc_frac"].mean()) if rows else None,
        "nc_frac": stats.nc_frac if stats else None,
        "mc_frac": stats.mc_frac if stats else None,
        "beta": stats.beta if stats else None,
        "failed": sum(not r.ok for r in results),
    }


def sample_cores(
        n: int,
        alpha: float,
        k: int,
        rng: RngSpec,
        predicate: Callable[[CoreDecomposition], bool],
        count: int = 1,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    ) -> List[dict]:
    """
    Rejection-samples graphs with m = round(alpha n) clauses until count of
    them have a core accepted by predicate.

    Returns:
    -------
    accepted: List[dict]
        Keys graph, decomposition, core (relabelled core graph), stream.
        Fewer than count entries when max_attempts is exhausted.
    """
    m = int(round(alpha * n))
    accepted = []
    for attempt in range(max_attempts):
        stream = rng.child(rng.stream * max_attempts + attempt)
        g = sample_er_graph(n, m, k, stream)
        decomposition = strip_core(g)
        if not predicate(decomposition):
            continue
        core, _ = decomposition.core_graph(g)
        accepted.append({
            "graph": g, "decomposition": decomposition, "core": core,
            "stream": stream.stream,
        })
        if len(accepted) == count:
            break
    if len(accepted) < count:
        warnings.warn(
            f"Accepted {len(accepted)}/{count} cores after {max_attempts} "
            f"attempts (n={n}, alpha={alpha}).", RuntimeWarning
        )
    return accepted


if __name__ == "__main__":
    pass
