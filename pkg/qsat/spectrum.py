from typing import List, NamedTuple, Optional, Sequence, Tuple

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import polars as pl
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator, eigsh, ArpackNoConvergence

from qsat.core import sample_cores
from qsat.enums import (
    SAT, UNSAT, UNDECIDED, DEFAULT_K, DEFAULT_MAX_QUBITS,
    DEFAULT_DENSE_THRESHOLD, DEFAULT_LANCZOS_TOL, DEFAULT_LANCZOS_MAX_ITER,
    DEFAULT_BASIS_MEMORY, DENSE_BLOCK_COLUMNS,
    DEFAULT_EPS_SAT, DEFAULT_EPS_UNSAT, DEFAULT_KERNEL_EPS,
    DEFAULT_KERNEL_MAX_DIM, KERNEL_AMBIGUITY_FACTOR, DEFAULT_EXPERIMENT_ALPHA,
    DEFAULT_MAX_ATTEMPTS, SPECTRUM_COLUMNS, EXPERIMENT_SUMMARY_COLUMNS,
)
from qsat.hypergraph import (
    InteractionGraph, ProjectorSet, sample_projectors, find_minifans,
)
from qsat.utils import RngSpec, as_generator, run_jobs, rows_to_frame, \
    binomial_error


@dataclass(frozen=True, eq=False)
class HamiltonianHandle:
    """
    H = sum_m |phi_m><phi_m| of one instance, applied clause by clause.
    Qubit 0 is the most significant bit of the basis index.
    """
    graph: InteractionGraph
    projectors: ProjectorSet
    _phis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        assert self.projectors.n_clauses == self.graph.n_clauses, \
            "Projector count does not match the clause count."
        phis = self.projectors.clause_vectors().reshape(
            (self.graph.n_clauses,) + (2,) * self.graph.k
        )
        object.__setattr__(self, "_phis", phis)

    @property
    def n_qubits(self) -> int:
        return self.graph.n_qubits

    @property
    def dim(self) -> int:
        return 2 ** self.graph.n_qubits


def apply_h(h: HamiltonianHandle, v: np.ndarray) -> np.ndarray:
    """
    Applies H to a state vector, or to the columns of a (2^N, B) block.

    Parameters:
    ----------
    h: HamiltonianHandle
        The Hamiltonian.
    v: np.ndarray
        Vector of 2^N amplitudes, or a block with one vector per column.

    Returns:
    -------
    Hv: np.ndarray
        Same shape as v.
    """
    v = np.asarray(v)
    assert v.shape[0] == h.dim, \
        f"Vector length {v.shape[0]} does not match dimension {h.dim}."
    n, k = h.n_qubits, h.graph.k
    batch = v.shape[1:]
    tensor = v.reshape((2,) * n + batch)
    out = np.zeros(tensor.shape, dtype=np.result_type(v.dtype, np.complex128))

    clause_axes = list(range(k))
    for phi, clause in zip(h._phis, h.graph.clauses):
        amplitude = np.tensordot(np.conj(phi), tensor, axes=(clause_axes, clause))
        out += np.moveaxis(np.multiply.outer(phi, amplitude), clause_axes, clause)
    return out.reshape(v.shape)


def dense_hamiltonian(
        h: HamiltonianHandle,
        block: int = DENSE_BLOCK_COLUMNS,
    ) -> np.ndarray:
    """
    Explicit 2^N x 2^N matrix, for small N only. Columns are filled block
    by block so that only the output matrix is held at full size.
    """
    matrix = np.empty((h.dim, h.dim), dtype=np.complex128)
    for start in range(0, h.dim, block):
        stop = min(start + block, h.dim)
        columns = np.zeros((h.dim, stop - start), dtype=np.complex128)
        columns[np.arange(start, stop), np.arange(stop - start)] = 1.0
        matrix[:, start:stop] = apply_h(h, columns)
    return matrix


class EigenEstimate(NamedTuple):
    e0: float
    residual: float
    iterations: int
    converged: bool


def _clamp(theta: float) -> float:
    return 0.0 if -1e-12 < theta < 0.0 else float(theta)


def _lanczos(h, v0, rows, tol, pick):
    # Preallocated basis; reorthogonalization works on views of it
    basis = np.empty((rows + 1, h.dim), dtype=np.complex128)
    basis[0] = v0
    alphas, betas = [], []
    theta, s = 0.0, np.ones(1)
    converged = False

    for j in range(rows):
        w = apply_h(h, basis[j])
        alphas.append(float(np.vdot(basis[j], w).real))
        w -= alphas[j] * basis[j]
        if j > 0:
            w -= betas[j - 1] * basis[j - 1]
        # Two passes of Gram-Schmidt against the whole basis
        active = basis[:j + 1]
        for _ in range(2):
            w -= (active @ w.conj()).conj() @ active
        beta = float(np.linalg.norm(w))

        values, vectors = eigh_tridiagonal(np.array(alphas), np.array(betas))
        theta, s = values[pick], vectors[:, pick]
        if abs(beta * s[-1]) < tol or beta < 1e-14:
            converged = True
            break
        betas.append(beta)
        basis[j + 1] = w / beta

    x = s @ basis[:len(s)]
    return float(theta), x / np.linalg.norm(x), len(alphas), converged


def _arpack(h, v0, ncv, max_iter, tol, which):
    matvecs = [0]

    def matvec(x):
        matvecs[0] += 1
        return apply_h(h, x)

    operator = LinearOperator((h.dim, h.dim), matvec=matvec,
                              dtype=np.complex128)
    try:
        values, vectors = eigsh(operator, k=1, which=which, v0=v0, ncv=ncv,
                                maxiter=max_iter, tol=tol)
        converged = True
    except ArpackNoConvergence as e:
        values, vectors = e.eigenvalues, e.eigenvectors
        converged = False
    if len(values) == 0:
        x = v0
        theta = float(np.vdot(x, apply_h(h, x)).real)
    else:
        theta, x = float(np.real(values[0])), vectors[:, 0]
    return theta, x / np.linalg.norm(x), matvecs[0], converged


def ground_energy(
        h: HamiltonianHandle,
        tol: float = DEFAULT_LANCZOS_TOL,
        max_iter: int = DEFAULT_LANCZOS_MAX_ITER,
        rng=None,
        which: str = "smallest",
        max_qubits: int = DEFAULT_MAX_QUBITS,
        basis_memory: int = DEFAULT_BASIS_MEMORY,
    ) -> EigenEstimate:
    """
    Extremal eigenvalue by Lanczos with full reorthogonalization from a
    random start vector. When min(max_iter, 2^N) + 1 basis vectors do not
    fit in basis_memory bytes, implicitly restarted Lanczos (ARPACK) runs
    instead, keeping as many basis vectors as fit.

    Parameters:
    ----------
    h: HamiltonianHandle
        The Hamiltonian.
    tol: float
        Stop when the Ritz residual estimate drops below tol. ARPACK takes
        it as the relative accuracy of the Ritz value.
    max_iter: int
        Krylov dimension limit, or the restart limit of an ARPACK run.
        Non-convergence is flagged.
    rng: RngSpec
        Stream of the start vector.
    which: str
        smallest or largest.
    max_qubits: int
        Largest accepted qubit count.
    basis_memory: int
        Memory budget of the Krylov basis in bytes.

    Returns:
    -------
    estimate: EigenEstimate
        e0 is clamped at 0 from below within round-off; residual is
        ||H x - e0 x|| for the Ritz vector x; iterations counts
        applications of H.
    """
    assert which in ("smallest", "largest"), \
        f"Invalid spectrum end {which}. Choose from smallest, largest."
    assert h.n_qubits <= max_qubits, \
        f"{h.n_qubits} qubits exceed the limit of {max_qubits}."
    gen = as_generator(rng)

    v0 = gen.standard_normal(h.dim) + 1j * gen.standard_normal(h.dim)
    v0 = v0 / np.linalg.norm(v0)
    rows = min(max_iter, h.dim)
    vector_bytes = 16 * h.dim

    if (rows + 1) * vector_bytes <= basis_memory:
        pick = 0 if which == "smallest" else -1
        theta, x, iterations, converged = _lanczos(h, v0, rows, tol, pick)
    else:
        ncv = max(3, min(basis_memory // vector_bytes - 1, rows, h.dim - 1))
        theta, x, iterations, converged = _arpack(
            h, v0, ncv, max_iter, tol, "SA" if which == "smallest" else "LA"
        )

    residual = float(np.linalg.norm(apply_h(h, x) - theta * x))
    if not converged:
        warnings.warn(
            f"Lanczos did not converge in {iterations} applications of H "
            f"(residual {residual:.2e}).", RuntimeWarning
        )
    return EigenEstimate(_clamp(theta), residual, iterations, converged)


def _dense_ground_energy(h: HamiltonianHandle) -> EigenEstimate:
    # Lowest eigenpair only; the decomposition is exact up to round-off
    values, vectors = eigh(dense_hamiltonian(h), subset_by_index=[0, 0],
                           overwrite_a=True, check_finite=False)
    theta, x = float(values[0]), vectors[:, 0]
    residual = float(np.linalg.norm(apply_h(h, x) - theta * x))
    return EigenEstimate(_clamp(theta), residual, 0, True)


def kernel_dimension(
        h: HamiltonianHandle,
        eps: float = DEFAULT_KERNEL_EPS,
        max_dim: int = DEFAULT_KERNEL_MAX_DIM,
        dense_threshold: int = DEFAULT_DENSE_THRESHOLD,
        rng=None,
    ) -> Tuple[int, bool]:
    """
    Number of eigenvalues below eps. Dense diagonalization up to
    dense_threshold qubits; beyond that the max_dim lowest eigenvalues are
    found with ARPACK on the matrix-free operator.

    Returns:
    -------
    count: int
        Kernel dimension estimate.
    ambiguous: bool
        True when an eigenvalue lies within a factor KERNEL_AMBIGUITY_FACTOR
        of eps, or when the count reaches max_dim.
    """
    if h.n_qubits <= dense_threshold:
        values = np.linalg.eigvalsh(dense_hamiltonian(h))
        saturated = False
    else:
        operator = LinearOperator(
            (h.dim, h.dim), matvec=lambda x: apply_h(h, x),
            dtype=np.complex128,
        )
        gen = as_generator(rng)
        v0 = gen.standard_normal(h.dim) + 1j * gen.standard_normal(h.dim)
        values = eigsh(operator, k=min(max_dim, h.dim - 2), which="SA",
                       v0=v0, return_eigenvectors=False)
        saturated = int(np.sum(values < eps)) >= len(values)

    count = int(np.sum(values < eps))
    near = (values > eps / KERNEL_AMBIGUITY_FACTOR) \
        & (values < eps * KERNEL_AMBIGUITY_FACTOR)
    ambiguous = bool(np.any(near)) or saturated
    if ambiguous:
        warnings.warn(
            f"Kernel dimension {count} is ambiguous at eps={eps}.",
            RuntimeWarning
        )
    return count, ambiguous


@dataclass(frozen=True)
class SpectrumReport:
    """Ground-energy estimate and SAT verdict of one instance."""
    e0: float
    residual: float
    verdict: str
    iterations: int
    converged: bool
    near_zero_count: Optional[int] = None
    ambiguous: bool = False

    def to_row(self, n, g, seed, minifan_count, wall_ms) -> dict:
        return {
            "N": n,
            "N_c": g.n_qubits,
            "M_c": g.n_clauses,
            "seed": seed,
            "minifan_count": minifan_count,
            "e0": self.e0,
            "residual": self.residual,
            "verdict": self.verdict,
            "iters": self.iterations,
            "wall_ms": wall_ms,
        }


def _verdict(estimate: EigenEstimate, eps_sat: float, eps_unsat: float) -> str:
    # A Ritz value bounds the smallest eigenvalue from above
    if estimate.e0 < eps_sat:
        return SAT
    if estimate.converged and estimate.e0 - estimate.residual > eps_unsat:
        return UNSAT
    return UNDECIDED


def decide_sat(
        g: InteractionGraph,
        mode: str = "generic",
        rng: RngSpec = None,
        eps_sat: float = DEFAULT_EPS_SAT,
        eps_unsat: float = DEFAULT_EPS_UNSAT,
        projectors: ProjectorSet = None,
        tol: float = DEFAULT_LANCZOS_TOL,
        max_iter: int = DEFAULT_LANCZOS_MAX_ITER,
        max_qubits: int = DEFAULT_MAX_QUBITS,
        count_kernel: bool = False,
        dense_threshold: int = DEFAULT_DENSE_THRESHOLD,
    ) -> SpectrumReport:
    """
    Samples projectors (unless given) and classifies the instance as SAT,
    UNSAT or UNDECIDED. Up to dense_threshold qubits the lowest eigenpair
    comes from dense diagonalization. Larger instances run Lanczos from two
    independent start vectors, which must agree, otherwise the instance is
    UNDECIDED.

    Parameters:
    ----------
    g: InteractionGraph
        Instance graph.
    mode: str
        Projector realization when sampling.
    rng: RngSpec
        Sub-keys 0 (projectors), 1 and 2 (start vectors) are used.
    eps_sat, eps_unsat: float
        e0 below eps_sat is SAT; a converged lower bound above eps_unsat is
        UNSAT.
    projectors: ProjectorSet
        Fixed realization instead of sampling.
    count_kernel: bool
        Also estimate the kernel dimension.
    dense_threshold: int
        Largest qubit count decided by dense diagonalization.

    Returns:
    -------
    report: SpectrumReport
    """
    assert eps_sat <= eps_unsat, "eps_sat must not exceed eps_unsat."
    rng = rng if rng is not None else RngSpec()
    if projectors is None:
        projectors = sample_projectors(g, mode, rng.generator(0))
    h = HamiltonianHandle(g, projectors)

    if g.n_clauses == 0:
        runs = [EigenEstimate(0.0, 0.0, 0, True)] * 2
    elif g.n_qubits <= dense_threshold:
        runs = [_dense_ground_energy(h)] * 2
    else:
        runs = [
            ground_energy(h, tol, max_iter, rng.generator(key),
                          max_qubits=max_qubits)
            for key in (1, 2)
        ]
    verdicts = {_verdict(run, eps_sat, eps_unsat) for run in runs}
    verdict = verdicts.pop() if len(verdicts) == 1 else UNDECIDED

    best = min(runs, key=lambda run: run.e0)
    count, ambiguous = (None, False)
    if count_kernel:
        count, ambiguous = kernel_dimension(h, rng=rng.generator(3))
    return SpectrumReport(
        e0=best.e0, residual=best.residual, verdict=verdict,
        iterations=sum(run.iterations for run in runs),
        converged=all(run.converged for run in runs),
        near_zero_count=count, ambiguous=ambiguous,
    )


def _decide_core(n, core, rng, eps_sat, eps_unsat, timings, dense_threshold):
    start = time.perf_counter()
    report = decide_sat(core, "generic", rng, eps_sat, eps_unsat,
                        dense_threshold=dense_threshold)
    wall_ms = int(1000 * (time.perf_counter() - start)) if timings else 0
    return report.to_row(n, core, rng.stream, len(find_minifans(core)), wall_ms)


def unsat_core_experiment(
        n_range: Sequence[int],
        samples_per_size: int,
        rng: RngSpec,
        k: int = DEFAULT_K,
        alpha: float = DEFAULT_EXPERIMENT_ALPHA,
        eps_sat: float = DEFAULT_EPS_SAT,
        eps_unsat: float = DEFAULT_EPS_UNSAT,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        max_qubits: int = DEFAULT_MAX_QUBITS,
        n_jobs: int = -1,
        progress: bool = True,
        timings: bool = True,
        dense_threshold: int = DEFAULT_DENSE_THRESHOLD,
    ) -> Tuple[pl.DataFrame, dict]:
    """
    Samples (N, M = round(alpha N)) graphs, keeps those whose core has
    M_c = N_c + 1 and decides each core with generic projectors. A SAT core
    says nothing about the full graph, an UNSAT core makes it UNSAT.

    Parameters:
    ----------
    n_range: Sequence[int]
        Graph sizes N.
    samples_per_size: int
        Accepted cores requested per N.
    rng: RngSpec
        Master stream; size N samples from stream N.
    alpha: float
        Clause density of the sampled graphs.
    max_attempts: int
        Rejection-sampling budget per N.
    dense_threshold: int
        Cores up to this many qubits are decided by dense diagonalization.

    Returns:
    -------
    table: pl.DataFrame
        One row per decided core (SPECTRUM_COLUMNS).
    deficits: dict
        N -> number of requested cores that were not found.
    """
    jobs, deficits = [], {}
    for n in n_range:
        def accept(decomposition):
            return decomposition.m_core == decomposition.n_core + 1 \
                and 0 < decomposition.n_core <= max_qubits
        accepted = sample_cores(n, alpha, k, rng.child(n), accept,
                                samples_per_size, max_attempts)
        deficits[n] = samples_per_size - len(accepted)
        for sample in accepted:
            jobs.append((n, sample["core"], RngSpec(rng.seed, sample["stream"]),
                         eps_sat, eps_unsat, timings, dense_threshold))

    results = run_jobs(_decide_core, jobs, n_jobs, "Deciding cores", progress)
    rows = [r.value for r in results if r.ok]
    return rows_to_frame(rows, SPECTRUM_COLUMNS), deficits


def _cell_row(n, n_c, cell: pl.DataFrame, deficit: int) -> dict:
    decidable = cell.filter(pl.col("verdict") != UNDECIDED)
    with_fans = decidable.filter(pl.col("minifan_count") > 0)
    without_fans = decidable.filter(pl.col("minifan_count") == 0)

    def p_unsat(frame):
        return binomial_error(
            frame.filter(pl.col("verdict") == UNSAT).height, frame.height
        )

    p, p_err = p_unsat(decidable)
    return {
        "N": n,
        "N_c": n_c,
        "samples": cell.height,
        "decidable": decidable.height,
        "p_unsat": p,
        "p_unsat_err": p_err,
        "p_unsat_minifan": p_unsat(with_fans)[0],
        "p_unsat_no_minifan": p_unsat(without_fans)[0],
        "minifan_fraction": with_fans.height / decidable.height
        if decidable.height else float("nan"),
        "deficit": deficit,
    }


def summarize_experiment(
        table: pl.DataFrame,
        deficits: dict = None,
    ) -> pl.DataFrame:
    """
    p_UNSAT per (N, N_c) cell and pooled per N_c (rows with N = 0), overall
    and split by minifan presence, with binomial standard errors.
    """
    deficits = deficits or {}
    rows = []
    for (n, n_c), cell in sorted(
            table.group_by(["N", "N_c"]), key=lambda item: item[0]):
        rows.append(_cell_row(n, n_c, cell, deficits.get(n, 0)))
    for (n_c,), cell in sorted(
            table.group_by(["N_c"]), key=lambda item: item[0]):
        rows.append(_cell_row(0, n_c, cell, 0))
    return rows_to_frame(rows, EXPERIMENT_SUMMARY_COLUMNS)


if __name__ == "__main__":
    pass
