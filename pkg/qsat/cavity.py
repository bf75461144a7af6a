from typing import List, Optional, Sequence, Tuple

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import polars as pl
from scipy.optimize import brentq

from qsat.core import DegreeLaw, degree_law_for_beta
from qsat.enums import (
    DEFAULT_POP_SIZE, DEFAULT_SWEEPS, DEFAULT_BURN_IN, DEFAULT_DRIFT_TOL,
    DEFAULT_BP_TOL, DEFAULT_BP_MAX_SWEEPS, DEFAULT_DAMPING, MAX_FIT_CONDITION,
    REGULAR_OCCUPANCY_SERIES, CAVITY_COLUMNS,
)
from qsat.hypergraph import InteractionGraph
from qsat.utils import RngSpec, as_generator, run_jobs, rows_to_frame


class NumericalDomainError(RuntimeError):
    """Raised when a free-energy term takes the log of a non-positive value."""


class IllConditionedFitError(RuntimeError):
    """Raised when the fugacity extrapolation is numerically singular."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


def _odds(l: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(l >= 1.0, np.inf, l / np.maximum(1.0 - l, 0.0))


def update_q_i(l: np.ndarray, lam: float) -> np.ndarray:
    """
    Cavity probability that a bond is occupied, seen from its qubit:
    lam / (1 + lam + sum l / (1 - l)) over the other bonds of the qubit.

    Parameters:
    ----------
    l: np.ndarray
        Incoming messages along the last axis. Zero entries are neutral, so
        rows of unequal length may be zero-padded.
    lam: float
        Fugacity, positive and finite.

    Returns:
    -------
    q: np.ndarray
        One message per row, in [0, 1]. An incoming message equal to one
        forces zero.
    """
    assert lam > 0 and np.isfinite(lam), "Fugacity must be positive and finite."
    l = np.asarray(l, dtype=np.float64)
    total = np.sum(_odds(l), axis=-1)
    q = lam / (1.0 + lam + total)
    return np.clip(q, 0.0, 1.0)


def update_q_a(l: np.ndarray, lam: float) -> np.ndarray:
    """Same update seen from the clause, with its k - 1 other bonds."""
    return update_q_i(l, lam)


def _hard_update(l: np.ndarray, offset: float) -> np.ndarray:
    total = np.sum(_odds(np.asarray(l, dtype=np.float64)), axis=-1)
    return 1.0 / (offset + total)


def node_terms(l: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hard-core node sums over the incoming messages on the last axis.

    Returns:
    -------
    denominator: np.ndarray
        prod(1 - l) + sum_j l_j prod_{others}(1 - l), the argument of the
        node free-energy term.
    numerator: np.ndarray
        sum_j l_j prod_{others}(1 - l), the probability mass of an occupied
        node.
    """
    l = np.atleast_2d(np.asarray(l, dtype=np.float64))
    om = 1.0 - l
    ones = np.ones(l.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, om[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(
        np.concatenate([ones, om[..., :0:-1]], axis=-1), axis=-1
    )[..., ::-1]
    numerator = np.sum(l * prefix * suffix, axis=-1)
    return np.prod(om, axis=-1) + numerator, numerator


def bond_term(q_clause: np.ndarray, q_qubit: np.ndarray, lam: float) -> np.ndarray:
    """Argument of the bond term: (1 - q_a)(1 - q_i) + q_a q_i / lam."""
    return (1.0 - q_clause) * (1.0 - q_qubit) + q_clause * q_qubit / lam


def occupancy(l: np.ndarray) -> np.ndarray:
    """
    Probability that a clause holds a dimer, from the messages of its bonds.
    Reports 1 where the ratio is 0/0.
    """
    denominator, numerator = node_terms(l)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = numerator / denominator
    return np.where(denominator > 0, ratio, 1.0)


def entropy_density(
        free_energy_density: float,
        occupancy: float,
        beta: float,
        lam: float,
    ) -> float:
    """S/N = F/N - beta <n_a> log lam."""
    return free_energy_density - beta * occupancy * math.log(lam)


@dataclass(frozen=True)
class CavityReport:
    """
    Observables of a cavity computation, per core qubit. entropy_density is
    derived from the other fields.
    """
    free_energy_density: float
    occupancy: float
    lam: float
    beta: float
    sweeps: int
    drift: float
    converged: bool

    @property
    def entropy_density(self) -> float:
        if not np.isfinite(self.lam):
            return float("nan")
        return entropy_density(
            self.free_energy_density, self.occupancy, self.beta, self.lam
        )

    def to_row(self, pop_size: int = 0) -> dict:
        return {
            "beta": self.beta,
            "lambda": self.lam,
            "pop_size": pop_size,
            "sweeps": self.sweeps,
            "F_density": self.free_energy_density,
            "occupancy": self.occupancy,
            "entropy_density": self.entropy_density,
            "converged": self.converged,
        }


@dataclass
class BondMessages:
    """
    Messages of one graph, indexed by bond. bonds[b] = (clause, qubit);
    q_qubit[b] is q_{i->b} and q_clause[b] is q_{a->b}. The bond-to-node
    messages are the same numbers: l_{b->a} = q_{i->b}, l_{b->i} = q_{a->b}.
    """
    bonds: List[Tuple[int, int]]
    clause_bonds: List[List[int]]
    qubit_bonds: List[List[int]]
    q_qubit: np.ndarray
    q_clause: np.ndarray

    @classmethod
    def for_graph(cls, g: InteractionGraph) -> "BondMessages":
        bonds = [(a, q) for a, c in enumerate(g.clauses) for q in c]
        clause_bonds = [[] for _ in range(g.n_clauses)]
        qubit_bonds = [[] for _ in range(g.n_qubits)]
        for b, (a, q) in enumerate(bonds):
            clause_bonds[a].append(b)
            qubit_bonds[q].append(b)
        n = len(bonds)
        return cls(bonds, clause_bonds, qubit_bonds, np.zeros(n), np.zeros(n))


def _others(values: np.ndarray) -> np.ndarray:
    """Row b holds every entry except entry b."""
    d = len(values)
    mask = ~np.eye(d, dtype=bool)
    return np.broadcast_to(values, (d, d))[mask].reshape(d, d - 1)


def bethe_free_energy(
        g: InteractionGraph,
        messages: BondMessages,
        lam: float,
    ) -> float:
    """
    Bethe free energy log Z of the monomer-dimer model on g. Bond, bond-qubit
    and bond-clause terms coincide, so the five contributions reduce to
    sum F_a + sum F_i - sum F_bond.

    Raises:
    -------
    NumericalDomainError:
        If a log argument is not positive.
    """
    total = 0.0
    for a, bonds in enumerate(messages.clause_bonds):
        arg = node_terms(messages.q_qubit[bonds])[0][0]
        if arg <= 0:
            raise NumericalDomainError(f"Clause term F_{a} has argument {arg}.")
        total += math.log(arg)
    for q, bonds in enumerate(messages.qubit_bonds):
        if not bonds:
            continue
        arg = node_terms(messages.q_clause[bonds])[0][0]
        if arg <= 0:
            raise NumericalDomainError(f"Qubit term F_{q} has argument {arg}.")
        total += math.log(arg)
    args = bond_term(messages.q_clause, messages.q_qubit, lam)
    if np.any(args <= 0):
        b = int(np.argmin(args))
        raise NumericalDomainError(
            f"Bond term F_{messages.bonds[b]} has argument {args[b]}."
        )
    return total - float(np.sum(np.log(args)))


def single_instance_bp(
        g: InteractionGraph,
        lam: float,
        tol: float = DEFAULT_BP_TOL,
        max_sweeps: int = DEFAULT_BP_MAX_SWEEPS,
        damping: float = DEFAULT_DAMPING,
        rng=None,
        hard_constraint: bool = False,
    ) -> Tuple[BondMessages, CavityReport]:
    """
    Belief propagation for dimer coverings of one graph. Sweeps update every
    node in random order, asynchronously, until the largest message change
    falls below tol.

    Parameters:
    ----------
    g: InteractionGraph
        Non-empty graph.
    lam: float
        Fugacity per dimer.
    tol: float
        Convergence threshold on the largest message change of a sweep.
    max_sweeps: int
        Sweep limit. Non-convergence is flagged, not raised.
    damping: float
        Weight of the previous message in each update.
    rng: RngSpec
        Random stream for the initialization and the sweep order.
    hard_constraint: bool
        Diagnostic only: replaces the fugacity by the constraint that every
        clause is covered. Known to be unstable on loopy graphs.

    Returns:
    -------
    messages: BondMessages
    report: CavityReport
        Densities per qubit of g. F is nan in hard-constraint mode.
    """
    assert g.n_clauses > 0, "Graph has no clauses."
    assert 0.0 <= damping < 1.0, "Damping must lie in [0, 1)."
    if hard_constraint:
        warnings.warn(
            "Hard-constraint cavity updates are a diagnostic mode and may "
            "not converge.", RuntimeWarning
        )
        lam = math.inf
    else:
        assert lam > 0 and np.isfinite(lam), "Fugacity must be positive."

    gen = as_generator(rng)
    messages = BondMessages.for_graph(g)
    start = 0.5 if hard_constraint else lam / (1.0 + lam)
    messages.q_qubit = gen.random(len(messages.bonds)) * start
    messages.q_clause = gen.random(len(messages.bonds)) * start

    nodes = [("c", a) for a in range(g.n_clauses)] + \
        [("q", q) for q in range(g.n_qubits) if messages.qubit_bonds[q]]

    converged, sweeps = False, 0
    for sweeps in range(1, max_sweeps + 1):
        change = 0.0
        for j in gen.permutation(len(nodes)):
            side, index = nodes[j]
            if side == "c":
                bonds = messages.clause_bonds[index]
                incoming, outgoing = messages.q_qubit, messages.q_clause
            else:
                bonds = messages.qubit_bonds[index]
                incoming, outgoing = messages.q_clause, messages.q_qubit
            others = _others(incoming[bonds])
            if hard_constraint:
                new = _hard_update(others, 1.0 if side == "c" else 2.0)
            else:
                new = update_q_i(others, lam)
            new = (1.0 - damping) * new + damping * outgoing[bonds]
            change = max(change, float(np.max(np.abs(new - outgoing[bonds]))))
            outgoing[bonds] = new
        if change < tol:
            converged = True
            break

    if not converged:
        warnings.warn(
            f"BP did not converge after {max_sweeps} sweeps "
            f"(lambda={lam}).", RuntimeWarning
        )

    n_a = float(np.mean([
        occupancy(messages.q_qubit[bonds])[0] for bonds in messages.clause_bonds
    ]))
    F = float("nan") if hard_constraint else bethe_free_energy(g, messages, lam)
    report = CavityReport(
        free_energy_density=F / g.n_qubits, occupancy=n_a, lam=lam,
        beta=g.alpha, sweeps=sweeps, drift=change, converged=converged,
    )
    return messages, report


@dataclass
class CavityPopulation:
    """
    Two message populations of the core ensemble: q_qubit holds q_{i->a}
    (bond seen from its qubit) and q_clause holds q_{a->i}.
    """
    q_qubit: np.ndarray = field(repr=False)
    q_clause: np.ndarray = field(repr=False)
    lam: float
    k: int
    degree_law: DegreeLaw

    def __post_init__(self):
        assert self.lam > 0, "Fugacity must be positive."
        assert len(self.q_qubit) == len(self.q_clause), \
            "Populations must have equal size."

    @property
    def size(self) -> int:
        return len(self.q_qubit)

    @property
    def beta(self) -> float:
        return self.degree_law.mean() / self.k


def _draw(population: np.ndarray, gen, counts: np.ndarray) -> np.ndarray:
    """Zero-padded rows with counts[r] members drawn from the population."""
    width = max(int(counts.max()), 1) if counts.size else 1
    picks = population[gen.integers(len(population), size=(len(counts), width))]
    return np.where(np.arange(width) < counts[:, None], picks, 0.0)


def _sweep(pop: CavityPopulation, gen: np.random.Generator):
    size = pop.size
    excess = pop.degree_law.sample_excess(gen, size)
    targets = gen.integers(size, size=size)
    pop.q_qubit[targets] = update_q_i(_draw(pop.q_clause, gen, excess), pop.lam)

    inputs = pop.q_qubit[gen.integers(size, size=(size, pop.k - 1))]
    targets = gen.integers(size, size=size)
    pop.q_clause[targets] = update_q_a(inputs, pop.lam)


def _measure(pop: CavityPopulation, gen: np.random.Generator) -> Tuple[float, ...]:
    size = pop.size
    l_clause = pop.q_qubit[gen.integers(size, size=(size, pop.k))]
    clause_arg, clause_num = node_terms(l_clause)

    degrees = pop.degree_law.sample(gen, size)
    qubit_arg, _ = node_terms(_draw(pop.q_clause, gen, degrees))

    edge_arg = bond_term(
        pop.q_clause[gen.integers(size, size=size)],
        pop.q_qubit[gen.integers(size, size=size)], pop.lam,
    )
    return (
        float(np.mean(np.log(clause_arg))),
        float(np.mean(clause_num / clause_arg)),
        float(np.mean(np.log(qubit_arg))),
        float(np.mean(np.log(edge_arg))),
    )


def population_dynamics(
        degree_law: DegreeLaw,
        k: int,
        lam: float,
        pop_size: int = DEFAULT_POP_SIZE,
        sweeps: int = DEFAULT_SWEEPS,
        rng=None,
        burn_in: float = DEFAULT_BURN_IN,
        drift_tol: float = DEFAULT_DRIFT_TOL,
    ) -> CavityReport:
    """
    Population dynamics for the dimer cavity equations on the core ensemble.
    Every sweep replaces pop_size members of each population; qubit updates
    draw their number of inputs from the size-biased (excess) degree law.
    Observables are averaged over the sweeps after the burn-in.

    Densities are per core qubit: with beta = E[d] / k clauses and k beta
    bonds per qubit, F/N = beta <F_a> + <F_i> - k beta <F_bond>.

    Parameters:
    ----------
    degree_law: DegreeLaw
        Qubit-degree law of the core.
    k: int
        Clause arity.
    lam: float
        Fugacity.
    pop_size: int
        Population size.
    sweeps: int
        Total sweeps, burn-in included.
    rng: RngSpec
        Random stream.
    burn_in: float
        Fraction of sweeps discarded.
    drift_tol: float
        Largest accepted change of the population means between the two
        halves of the measurement window.

    Returns:
    -------
    report: CavityReport
    """
    assert 0.0 < burn_in < 1.0, "Burn-in must be a fraction in (0, 1)."
    assert sweeps >= 2, "Need at least two sweeps."
    gen = as_generator(rng)
    upper = lam / (1.0 + lam)
    pop = CavityPopulation(
        gen.random(pop_size) * upper, gen.random(pop_size) * upper,
        lam, k, degree_law,
    )

    first_measured = min(int(burn_in * sweeps), sweeps - 2)
    samples, means = [], []
    for sweep in range(sweeps):
        _sweep(pop, gen)
        if sweep >= first_measured:
            samples.append(_measure(pop, gen))
            means.append((pop.q_qubit.mean(), pop.q_clause.mean()))

    F_a, n_a, F_i, F_bond = np.mean(samples, axis=0)
    half = len(means) // 2
    means = np.asarray(means)
    drift = float(np.max(np.abs(means[:half].mean(axis=0)
                                - means[half:].mean(axis=0))))
    converged = drift < drift_tol
    if not converged:
        warnings.warn(
            f"Population drift {drift:.2e} exceeds {drift_tol:.0e} "
            f"(lambda={lam}).", RuntimeWarning
        )

    beta = pop.beta
    return CavityReport(
        free_energy_density=float(beta * F_a + F_i - k * beta * F_bond),
        occupancy=float(n_a), lam=lam, beta=beta, sweeps=sweeps,
        drift=drift, converged=converged,
    )


def _grid_point(beta, lam, k, pop_size, sweeps, rng):
    law = degree_law_for_beta(beta, k)
    report = population_dynamics(law, k, lam, pop_size, sweeps, rng)
    return report.to_row(pop_size)


def population_grid(
        betas: Sequence[float],
        lambdas: Sequence[float],
        k: int,
        rng: RngSpec,
        pop_size: int = DEFAULT_POP_SIZE,
        sweeps: int = DEFAULT_SWEEPS,
        n_jobs: int = -1,
        progress: bool = True,
    ) -> pl.DataFrame:
    """
    Runs population dynamics over a (beta, lambda) grid. Grid point j uses
    stream j of rng; failed points are dropped with a warning.
    """
    jobs = []
    for beta in betas:
        for lam in lambdas:
            jobs.append((beta, lam, k, pop_size, sweeps,
                         rng.child(len(jobs))))
    results = run_jobs(_grid_point, jobs, n_jobs, "Population dynamics",
                       progress)
    rows = [r.value for r in results if r.ok]
    return rows_to_frame(rows, CAVITY_COLUMNS)


def regular_fixed_point(lam: float, k: int = 3, d: int = 3) -> dict:
    """
    Exact fixed point of the cavity equations on (k, d)-regular graphs.

    Parameters:
    ----------
    lam: float
        Fugacity.
    k: int
        Clause arity.
    d: int
        Qubit degree.

    Returns:
    -------
    fixed_point: dict
        q_qubit, q_clause, occupancy, free_energy_density, entropy_density
        (densities per qubit).
    """
    assert lam > 0, "Fugacity must be positive."

    def clause_side(q_qubit):
        return float(update_q_a(np.full(k - 1, q_qubit), lam))

    def qubit_side(q_clause):
        return float(update_q_i(np.full(d - 1, q_clause), lam))

    upper = lam / (1.0 + lam)
    q_qubit = brentq(
        lambda x: x - qubit_side(clause_side(x)), 0.0, upper,
        xtol=1e-15, rtol=4 * np.finfo(float).eps,
    )
    q_clause = clause_side(q_qubit)

    clause_arg, clause_num = node_terms(np.full(k, q_qubit))
    qubit_arg, _ = node_terms(np.full(d, q_clause))
    bond_arg = bond_term(q_clause, q_qubit, lam)
    beta = d / k
    F = beta * math.log(clause_arg[0]) + math.log(qubit_arg[0]) \
        - d * math.log(bond_arg)
    n_a = float(clause_num[0] / clause_arg[0])
    return {
        "q_qubit": q_qubit,
        "q_clause": q_clause,
        "occupancy": n_a,
        "free_energy_density": F,
        "entropy_density": entropy_density(F, n_a, beta, lam),
    }


def regular_series(lam, coefficients=REGULAR_OCCUPANCY_SERIES):
    """c0 + c1 lam^-1/2 + c2 lam^-1."""
    x = np.asarray(lam, dtype=np.float64) ** -0.5
    return coefficients[0] + coefficients[1] * x + coefficients[2] * x ** 2


def regular_entropy_series(lam):
    """
    Large-fugacity entropy of the k = d = 3 regular ensemble, including the
    log(lam) lam^-1/2 term.
    """
    lam = np.asarray(lam, dtype=np.float64)
    log_lam = np.log(lam)
    return math.log(4.0 / 3.0) + (0.4714 * log_lam + 0.9428) / np.sqrt(lam) \
        - 0.06 * (log_lam + 1.0) / lam


def extrapolate_lambda(
        samples: Sequence[Tuple[float, float]],
        log_correction: Optional[bool] = None,
    ) -> Tuple[float, float]:
    """
    Least-squares fit S(lam) = S_inf + a lam^-1/2 + b lam^-1, optionally with
    a lam^-1/2 log(lam) column. The regular-graph entropy carries that
    column, so it is added by default once four fugacities are available.

    Parameters:
    ----------
    samples: Sequence[Tuple[float, float]]
        (lam, S) pairs.
    log_correction: bool
        Add the log(lam) lam^-1/2 column. None adds it when at least four
        distinct fugacities are given.

    Returns:
    -------
    S_inf: float
        Intercept of the fit.
    residual: float
        Root-mean-square fit residual.

    Raises:
    -------
    IllConditionedFitError:
        If the design matrix is singular or badly conditioned.
    """
    lams = np.array([s[0] for s in samples], dtype=np.float64)
    values = np.array([s[1] for s in samples], dtype=np.float64)
    if log_correction is None:
        log_correction = len(np.unique(lams)) >= 4
    n_columns = 4 if log_correction else 3
    assert len(np.unique(lams)) >= n_columns, \
        f"Need at least {n_columns} distinct fugacities."

    x = lams ** -0.5
    columns = [np.ones_like(x), x]
    if log_correction:
        columns.append(x * np.log(lams))
    columns.append(x ** 2)
    design = np.stack(columns, axis=1)

    condition = float(np.linalg.cond(design))
    if not np.isfinite(condition) or condition > MAX_FIT_CONDITION:
        raise IllConditionedFitError(
            f"Fugacity fit is ill-conditioned (condition {condition:.2e}).",
            condition,
        )
    coefficients, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coefficients - values) ** 2)))
    return float(coefficients[0]), residual


if __name__ == "__main__":
    pass
