from typing import Dict, List, Optional, Sequence

import os
import sys
import time
import argparse
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

import qsat
from qsat import cavity, core, dimer, entropy, hypergraph, spectrum
from qsat.enums import (
    DEFAULT_K, DEFAULT_SEED, PROJECTOR_MODES, TABLE_FORMATS, DEFAULT_POP_SIZE,
    DEFAULT_SWEEPS, DEFAULT_LAMBDAS, DEFAULT_EPS_SAT, DEFAULT_EPS_UNSAT,
    DEFAULT_EXPERIMENT_ALPHA, DEFAULT_EXPERIMENT_SIZES,
    DEFAULT_EXPERIMENT_SAMPLES, DEFAULT_MAX_ATTEMPTS, DEFAULT_MAX_QUBITS,
    DEFAULT_DENSE_THRESHOLD,
    REFERENCE_ALPHA_C, REFERENCE_CORE_ENTROPY, ENUMERATION_COLUMNS,
    FINITE_SIZE_COLUMNS, CAVITY_COLUMNS, SPECTRUM_COLUMNS,
)
from qsat.utils import (
    RngSpec, run_jobs, rows_to_frame, write_table, load_table, write_json,
    file_digest, concatenate_tables,
)


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3


class UsageError(Exception):
    """Invalid command line or configuration."""


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(message)


@dataclass
class ExperimentManifest:
    """
    Provenance of one command run: parameters, master seed, toolkit version,
    digests of the files read and written, and stage timings in seconds.
    """
    command: str
    parameters: dict
    seed: int
    version: str = qsat.__version__
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    def add_input(self, path: str):
        self.inputs[path] = file_digest(path)

    def add_output(self, path: str):
        self.outputs[path] = file_digest(path)

    def write(self, out_dir: str) -> str:
        return write_json(
            asdict(self), os.path.join(out_dir, f"{self.command}_manifest.json")
        )


class _Stage:
    """Times a block into manifest.timings (zero when timings are off)."""

    def __init__(self, manifest: ExperimentManifest, name: str, enabled: bool):
        self.manifest, self.name, self.enabled = manifest, name, enabled

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        elapsed = time.perf_counter() - self.start if self.enabled else 0.0
        self.manifest.timings[self.name] = round(elapsed, 6)
        return False


def read_config(path: str) -> Dict[str, str]:
    """
    Reads a plain-text config file of `key = value` lines. `#` starts a
    comment; keys use the long flag names with - or _.
    """
    config = {}
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{number}: expected `key = value`.")
            key, value = (part.strip() for part in line.split("=", 1))
            config[key.lstrip("-").replace("-", "_")] = value
    return config


def _apply_config(parser: argparse.ArgumentParser, config: Dict[str, str]):
    """Turns config entries into parser defaults so explicit flags win."""
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, raw in config.items():
        if key not in actions:
            raise UsageError(f"Unknown config key `{key}`.")
        action = actions[key]
        convert = action.type or str
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("+", "*"):
            value = [convert(v) for v in raw.replace(",", " ").split()]
        else:
            value = convert(raw)
        defaults[key] = value
    parser.set_defaults(**defaults)


def _rng(args, stream: int = 0) -> RngSpec:
    return RngSpec(args.seed, stream)


def _table_path(args, name: str) -> str:
    return os.path.join(args.out_dir, f"{name}.{args.format}")


def _clause_count(args) -> int:
    if args.m is not None:
        return args.m
    if args.alpha is None:
        raise UsageError("Give either --alpha or --m.")
    return int(round(args.alpha * args.n))


def cmd_gen(args, manifest: ExperimentManifest) -> int:
    """Samples one instance and writes it as JSON."""
    if args.n is None:
        raise UsageError("gen requires --n.")
    rng = _rng(args, args.stream)
    g = hypergraph.sample_er_graph(args.n, _clause_count(args), args.k,
                                   rng.generator(0))
    projectors = None
    if args.mode != "none":
        projectors = hypergraph.sample_projectors(g, args.mode, rng.generator(1))
    decomposition = core.strip_core(g) if args.with_core else None

    out = args.out or os.path.join(args.out_dir, f"instance_{args.stream}.json")
    hypergraph.save_instance(
        out, g, projectors, rng,
        decomposition.to_dict() if decomposition else None,
    )
    manifest.add_output(out)
    print(f"Wrote instance N={g.n_qubits} M={g.n_clauses} k={g.k} to {out}")
    return EXIT_OK


def cmd_core(args, manifest: ExperimentManifest) -> int:
    """Analytic core statistics, empirical stripping or one instance's core."""
    failed = 0
    if args.instance:
        manifest.add_input(args.instance)
        instance = hypergraph.load_instance(args.instance)
        g = instance["graph"]
        decomposition = core.strip_core(g)
        name = os.path.splitext(os.path.basename(args.instance))[0]
        out = os.path.join(args.out_dir, f"{name}_core.json")
        hypergraph.save_instance(out, g, instance["projectors"],
                                 instance["rng"], decomposition.to_dict())
        manifest.add_output(out)
        print(f"Core of {args.instance}: N_c={decomposition.n_core} "
              f"M_c={decomposition.m_core}")
        return EXIT_OK

    table = core.core_stats_table(args.alphas, args.k)
    out = write_table(table, _table_path(args, "core_stats"))
    manifest.add_output(out)
    print(table)

    if args.n:
        for i, alpha in enumerate(args.alphas):
            comparison = core.empirical_vs_analytic(
                alpha, args.k, args.n, args.samples, _rng(args, i),
                args.jobs, not args.quiet,
            )
            failed += comparison["failed"]
            out = write_table(comparison["table"],
                              _table_path(args, f"core_samples_{i}"))
            manifest.add_output(out)
            print(f"alpha={alpha}: mean N_c/N={comparison['mean_nc_frac']} "
                  f"(analytic {comparison['nc_frac']}), mean M_c/N="
                  f"{comparison['mean_mc_frac']} (analytic "
                  f"{comparison['mc_frac']})")
    return EXIT_PARTIAL if failed else EXIT_OK


def _sampled_cores(args, predicate) -> List[tuple]:
    """(instance_id, core graph) pairs from the ensemble flags."""
    cores = []
    for n in args.sizes:
        accepted = core.sample_cores(
            n, args.alpha, args.k, _rng(args, n), predicate, args.samples,
            args.max_attempts,
        )
        cores.extend((f"{n}-{s['stream']}", s["core"]) for s in accepted)
    return cores


def _instance_cores(args, manifest) -> List[tuple]:
    cores = []
    for path in args.instances:
        manifest.add_input(path)
        g = hypergraph.load_instance(path)["graph"]
        decomposition = core.strip_core(g)
        name = os.path.splitext(os.path.basename(path))[0]
        cores.append((name, decomposition.core_graph(g)[0]))
    return cores


def _enumerate_job(instance_id, g, cap, bound):
    result = dimer.enumerate_coverings(g, cap=cap, bound=bound)
    return (result.to_row(instance_id, g.n_qubits, g.n_clauses),
            [c.to_pairs() for c in result.coverings])


def cmd_dimers(args, manifest: ExperimentManifest) -> int:
    """Exact dimer-covering counts of cores."""
    if args.instances:
        cores = _instance_cores(args, manifest)
    else:
        def predicate(decomposition):
            return decomposition.m_core == decomposition.n_core \
                and 0 < decomposition.n_core <= args.max_core
        cores = _sampled_cores(args, predicate)

    with _Stage(manifest, "enumerate", not args.no_timings):
        jobs = [(i, g, args.cap, args.bound) for i, g in cores]
        results = run_jobs(_enumerate_job, jobs, args.jobs,
                           "Enumerating coverings", not args.quiet)

    rows = [r.value[0] for r in results if r.ok]
    table = rows_to_frame(rows, ENUMERATION_COLUMNS)
    manifest.add_output(write_table(table, _table_path(args, "enumeration")))
    if args.cap:
        coverings = {r.value[0]["instance_id"]: r.value[1]
                     for r in results if r.ok}
        out = write_json(coverings, os.path.join(args.out_dir, "coverings.json"))
        manifest.add_output(out)

    if table.height >= 2 and table["N_c"].n_unique() >= 2:
        density = (table["log_count"] / table["N_c"]).to_numpy()
        intercept, slope = dimer.finite_size_extrapolation(
            table["N_c"].to_numpy(), density
        )
        print(f"S/N_c extrapolated to N_c -> inf: {intercept:.4f} "
              f"(slope {slope:.4f})")
    print(table)
    return EXIT_PARTIAL if len(rows) < len(jobs) else EXIT_OK


def _finite_size_job(instance_id, g, lam, rng):
    result = dimer.enumerate_coverings(g)
    _, report = cavity.single_instance_bp(g, lam, rng=rng)
    return {
        "instance_id": instance_id,
        "N_c": g.n_qubits,
        "M_c": g.n_clauses,
        "lambda": lam,
        "log_count": result.log_count,
        "S_exact": result.log_count,
        "S_bp": report.entropy_density * g.n_qubits,
        "bp_converged": report.converged,
    }


def cmd_cavity(args, manifest: ExperimentManifest) -> int:
    """Regular fixed point, population grid or BP-versus-exact comparison."""
    expected = 0
    if args.regular:
        rows = []
        for lam in args.lambdas:
            point = cavity.regular_fixed_point(lam, args.k, args.d)
            rows.append({
                "beta": args.d / args.k, "lambda": lam, "pop_size": 0,
                "sweeps": 0, "F_density": point["free_energy_density"],
                "occupancy": point["occupancy"],
                "entropy_density": point["entropy_density"],
                "converged": True,
            })
        table = rows_to_frame(rows, CAVITY_COLUMNS)
        name = "cavity_regular"

    elif args.finite_size:
        def predicate(decomposition):
            return decomposition.m_core == decomposition.n_core \
                and 0 < decomposition.n_core <= args.max_core
        cores = _sampled_cores(args, predicate)
        lam = args.bp_lambda
        jobs = [(i, g, lam, _rng(args, j)) for j, (i, g) in enumerate(cores)]
        expected = len(jobs)
        with _Stage(manifest, "finite_size", not args.no_timings):
            results = run_jobs(_finite_size_job, jobs, args.jobs,
                               "BP vs exact", not args.quiet)
        table = rows_to_frame([r.value for r in results if r.ok],
                              FINITE_SIZE_COLUMNS)
        name = "finite_size"

    else:
        betas = args.betas if args.grid else args.betas[:1]
        expected = len(betas) * len(args.lambdas)
        with _Stage(manifest, "population", not args.no_timings):
            table = cavity.population_grid(
                betas, args.lambdas, args.k, _rng(args), args.pop_size,
                args.sweeps, args.jobs, not args.quiet,
            )
        name = "cavity_grid"

    manifest.add_output(write_table(table, _table_path(args, name)))
    print(table)

    if not args.finite_size and len(args.lambdas) >= 3:
        for beta in table["beta"].unique(maintain_order=True).to_list():
            part = table.filter(table["beta"] == beta)
            samples = list(zip(part["lambda"].to_list(),
                               part["entropy_density"].to_list()))
            fits = [("power", False)]
            if len(set(part["lambda"].to_list())) >= 4:
                fits.insert(0, ("power+log", True))
            for label, log_correction in fits:
                try:
                    s_inf, residual = cavity.extrapolate_lambda(
                        samples, log_correction
                    )
                    print(f"beta={beta:.4f}: S/N_c extrapolated to "
                          f"{s_inf:.4f} ({label} fit, residual "
                          f"{residual:.1e})")
                except (AssertionError, cavity.IllConditionedFitError) as e:
                    warnings.warn(
                        f"{label} extrapolation at beta={beta} failed: {e}",
                        RuntimeWarning
                    )
    return EXIT_PARTIAL if table.height < expected else EXIT_OK


def _diag_job(instance_id, g, projectors, mode, rng, eps_sat, eps_unsat,
              count_kernel, timings, dense_threshold):
    start = time.perf_counter()
    report = spectrum.decide_sat(g, mode, rng, eps_sat, eps_unsat,
                                 projectors=projectors,
                                 count_kernel=count_kernel,
                                 dense_threshold=dense_threshold)
    wall_ms = int(1000 * (time.perf_counter() - start)) if timings else 0
    row = report.to_row(g.n_qubits, g, rng.stream,
                        len(hypergraph.find_minifans(g)), wall_ms)
    row["instance_id"] = instance_id
    row["near_zero_count"] = report.near_zero_count
    return row


def cmd_diag(args, manifest: ExperimentManifest) -> int:
    """SAT/UNSAT verdicts of instances from their ground energy."""
    jobs = []
    if args.instances:
        for j, path in enumerate(args.instances):
            manifest.add_input(path)
            instance = hypergraph.load_instance(path)
            g, projectors = instance["graph"], instance["projectors"]
            if args.core:
                decomposition = core.strip_core(g)
                if projectors is not None:
                    projectors = projectors.subset(decomposition.core_clauses)
                g = decomposition.core_graph(g)[0]
            jobs.append((path, g, projectors, args.mode, _rng(args, j),
                         args.eps_sat, args.eps_unsat, args.kernel,
                         not args.no_timings, args.dense_threshold))
    else:
        for j in range(args.samples):
            rng = _rng(args, j)
            g = hypergraph.sample_er_graph(args.n, _clause_count(args), args.k,
                                           rng.generator(4))
            if args.core:
                g = core.strip_core(g).core_graph(g)[0]
            jobs.append((str(j), g, None, args.mode, rng, args.eps_sat,
                         args.eps_unsat, args.kernel, not args.no_timings,
                         args.dense_threshold))

    if any(job[1].n_qubits > args.max_qubits for job in jobs):
        raise UsageError(f"Instances exceed --max-qubits {args.max_qubits}.")

    with _Stage(manifest, "diagonalize", not args.no_timings):
        results = run_jobs(_diag_job, jobs, args.jobs, "Diagonalizing",
                           not args.quiet)
    rows = [r.value for r in results if r.ok]
    table = rows_to_frame(rows, SPECTRUM_COLUMNS)
    manifest.add_output(write_table(table, _table_path(args, "spectrum")))
    print(table)
    return EXIT_PARTIAL if len(rows) < len(jobs) else EXIT_OK


def cmd_experiment(args, manifest: ExperimentManifest) -> int:
    """UNSAT-core experiment over a grid of graph sizes."""
    parts, deficits, decided, accepted = [], {}, 0, 0
    with _Stage(manifest, "experiment", not args.no_timings):
        for n in args.sizes:
            table, deficit = spectrum.unsat_core_experiment(
                [n], args.samples, _rng(args), args.k, args.alpha,
                args.eps_sat, args.eps_unsat, args.max_attempts,
                args.max_qubits, args.jobs, not args.quiet,
                not args.no_timings, args.dense_threshold,
            )
            deficits.update(deficit)
            accepted += args.samples - deficit[n]
            decided += table.height
            parts.append(write_table(table, _table_path(args, f"experiment_{n}")))

    out = concatenate_tables(parts, _table_path(args, "experiment"))
    for part in parts:
        os.remove(part)
    manifest.add_output(out)

    summary = spectrum.summarize_experiment(load_table(out), deficits)
    manifest.add_output(write_table(summary,
                                    _table_path(args, "experiment_summary")))
    print(summary)
    for n, deficit in deficits.items():
        if deficit:
            warnings.warn(f"N={n}: {deficit} cores missing.", RuntimeWarning)
    return EXIT_PARTIAL if decided < accepted else EXIT_OK


def cmd_ledger(args, manifest: ExperimentManifest) -> int:
    """Entropy ledger at one clause density."""
    s_core = args.s_core
    provenance = args.provenance
    if args.pauling:
        s_core = None
    result = entropy.ledger(args.alpha, args.k, s_core, provenance, args.gamma)
    doc = result.to_dict(args.units)
    out = write_json(doc, os.path.join(args.out_dir, "ledger.json"))
    manifest.add_output(out)
    for name, entry in doc["entries"].items():
        print(f"{name:>24}: {entry['value']:.4f} {args.units}/N "
              f"({entry['provenance']})")
    for name, value in doc["reference"]["values"].items():
        print(f"{name:>24}: {value:.4f} {args.units}/N (reference)")
    return EXIT_OK


def cmd_report(args, manifest: ExperimentManifest) -> int:
    """Renders PNG figures from the result tables found in --inputs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    def find(name):
        for storage_format in TABLE_FORMATS:
            path = os.path.join(args.inputs, f"{name}.{storage_format}")
            if os.path.exists(path):
                manifest.add_input(path)
                return load_table(path)
        return None

    summary = find("experiment_summary")
    if summary is not None:
        pooled = summary.filter(summary["N"] == 0).sort("N_c")
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.errorbar(pooled["N_c"], pooled["p_unsat"], pooled["p_unsat_err"],
                    marker="o", label="all cores")
        ax.plot(pooled["N_c"], pooled["p_unsat_no_minifan"], "*",
                label="without minifans")
        ax.plot(pooled["N_c"], pooled["p_unsat_minifan"], "s",
                label="with minifans")
        ax.set_xlabel("$N_c$")
        ax.set_ylabel("$p_{UNSAT}$")
        ax.legend()
        written.append(_save(fig, args.out_dir, "unsat_cores.png"))

    grid = find("cavity_grid")
    if grid is not None:
        fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
        for lam in sorted(grid["lambda"].unique().to_list()):
            part = grid.filter(grid["lambda"] == lam).sort("beta")
            top.plot(part["beta"], part["entropy_density"], marker=".",
                     label=f"$\\lambda$={lam:g}")
            bottom.plot(part["beta"], part["occupancy"], marker=".")
        top.set_ylabel("$S_{core}/N_c$")
        bottom.set_ylabel("$\\langle n_a \\rangle$")
        bottom.set_xlabel("$\\beta$")
        top.legend()
        written.append(_save(fig, args.out_dir, "cavity_grid.png"))

    sweep = find("finite_size")
    if sweep is None:
        sweep = find("enumeration")
    if sweep is not None and sweep.height:
        fig, ax = plt.subplots(figsize=(6, 4))
        x = 1.0 / sweep["N_c"].to_numpy()
        y = sweep["log_count"].to_numpy() / sweep["N_c"].to_numpy()
        finite = np.isfinite(y)
        ax.plot(x[finite], y[finite], ".", label="exact")
        if "S_bp" in sweep.columns:
            ax.plot(x, sweep["S_bp"].to_numpy() / sweep["N_c"].to_numpy(),
                    "x", label="BP")
        if np.unique(x[finite]).size >= 2:
            intercept, slope = dimer.finite_size_extrapolation(
                1.0 / x[finite], y[finite]
            )
            line = np.linspace(0.0, x.max(), 50)
            ax.plot(line, intercept + slope * line, "-",
                    label=f"fit, $N_c\\to\\infty$: {intercept:.3f}")
        ax.set_xlabel("$1/N_c$")
        ax.set_ylabel("$S/N_c$")
        ax.legend()
        written.append(_save(fig, args.out_dir, "finite_size.png"))

    if not written:
        raise UsageError(f"No result tables found in {args.inputs}.")
    for path in written:
        manifest.add_output(path)
        print(f"Wrote {path}")
    return EXIT_OK


def _save(fig, out_dir: str, name: str) -> str:
    import matplotlib.pyplot as plt

    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


COMMANDS = {
    "gen": cmd_gen,
    "core": cmd_core,
    "dimers": cmd_dimers,
    "cavity": cmd_cavity,
    "diag": cmd_diag,
    "experiment": cmd_experiment,
    "ledger": cmd_ledger,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="Master seed of all random streams.")
    common.add_argument("--jobs", type=int, default=-1,
                        help="Worker processes, -1 for all CPUs.")
    common.add_argument("--out-dir", default="results",
                        help="Directory of result tables and manifests.")
    common.add_argument("--config", default=None,
                        help="Config file of `key = value` lines.")
    common.add_argument("--format", choices=TABLE_FORMATS, default="csv",
                        help="Result table format.")
    common.add_argument("--no-timings", action="store_true",
                        help="Zero wall-clock fields for reproducible output.")
    common.add_argument("--quiet", action="store_true",
                        help="Hide progress bars.")

    ensemble = _Parser(add_help=False)
    ensemble.add_argument("--k", type=int, default=DEFAULT_K)
    ensemble.add_argument("--alpha", type=float, default=None)

    parser = _Parser(prog="qsat", description="Random k-QSAT toolkit.")
    parser.add_argument("--version", action="version",
                        version=f"qsat {qsat.__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    parser.subcommands = sub.choices

    p = sub.add_parser("gen", parents=[common, ensemble],
                       help="Sample an instance.")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--mode", choices=PROJECTOR_MODES + ["none"],
                   default="generic")
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--with-core", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("core", parents=[common, ensemble],
                       help="Core statistics.")
    p.add_argument("--alphas", type=float, nargs="+",
                   default=[REFERENCE_ALPHA_C])
    p.add_argument("--n", type=int, default=0,
                   help="Also strip sampled graphs of this size.")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--instance", default=None)

    def add_core_sampling(p, alpha):
        p.set_defaults(alpha=alpha)
        p.add_argument("--sizes", type=int, nargs="+",
                       default=DEFAULT_EXPERIMENT_SIZES)
        p.add_argument("--samples", type=int,
                       default=DEFAULT_EXPERIMENT_SAMPLES)
        p.add_argument("--max-attempts", type=int,
                       default=DEFAULT_MAX_ATTEMPTS)
        p.add_argument("--max-core", type=int, default=30)

    p = sub.add_parser("dimers", parents=[common, ensemble],
                       help="Count dimer coverings of cores.")
    add_core_sampling(p, REFERENCE_ALPHA_C)
    p.add_argument("--instances", nargs="*", default=[])
    p.add_argument("--cap", type=int, default=0)
    p.add_argument("--bound", type=int, default=None)

    p = sub.add_parser("cavity", parents=[common, ensemble],
                       help="Cavity computations.")
    add_core_sampling(p, REFERENCE_ALPHA_C)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--regular", action="store_true")
    mode.add_argument("--grid", action="store_true")
    mode.add_argument("--finite-size", action="store_true")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--betas", type=float, nargs="+", default=[1.0])
    p.add_argument("--lambdas", type=float, nargs="+",
                   default=DEFAULT_LAMBDAS)
    p.add_argument("--pop-size", type=int, default=DEFAULT_POP_SIZE)
    p.add_argument("--sweeps", type=int, default=DEFAULT_SWEEPS)
    p.add_argument("--bp-lambda", type=float, default=1e3,
                   help="Fugacity of the BP run in --finite-size.")

    p = sub.add_parser("diag", parents=[common, ensemble],
                       help="Ground energy and SAT verdicts.")
    p.add_argument("--instances", nargs="*", default=[])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--mode", choices=PROJECTOR_MODES, default="generic")
    p.add_argument("--core", action="store_true")
    p.add_argument("--kernel", action="store_true")
    p.add_argument("--eps-sat", type=float, default=DEFAULT_EPS_SAT)
    p.add_argument("--eps-unsat", type=float, default=DEFAULT_EPS_UNSAT)
    p.add_argument("--max-qubits", type=int, default=DEFAULT_MAX_QUBITS)
    p.add_argument("--dense-threshold", type=int,
                   default=DEFAULT_DENSE_THRESHOLD,
                   help="Largest core decided by dense diagonalization.")

    p = sub.add_parser("experiment", parents=[common, ensemble],
                       help="UNSAT-core experiment.")
    add_core_sampling(p, DEFAULT_EXPERIMENT_ALPHA)
    p.add_argument("--eps-sat", type=float, default=DEFAULT_EPS_SAT)
    p.add_argument("--eps-unsat", type=float, default=DEFAULT_EPS_UNSAT)
    p.add_argument("--max-qubits", type=int, default=DEFAULT_MAX_QUBITS)
    p.add_argument("--dense-threshold", type=int,
                   default=DEFAULT_DENSE_THRESHOLD,
                   help="Largest core decided by dense diagonalization.")

    p = sub.add_parser("ledger", parents=[common, ensemble],
                       help="Entropy ledger.")
    p.set_defaults(alpha=REFERENCE_ALPHA_C)
    p.add_argument("--s-core", type=float, default=REFERENCE_CORE_ENTROPY,
                   help="Core entropy per core qubit.")
    p.add_argument("--provenance", choices=["cavity", "exact"],
                   default="cavity")
    p.add_argument("--pauling", action="store_true",
                   help="Use the Pauling estimate for the core.")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--units", choices=["nats", "bits"], default="nats")

    p = sub.add_parser("report", parents=[common], help="Render figures.")
    p.add_argument("--inputs", default="results")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point. Returns 0 on success, 1 on usage errors, 2 on runtime
    failures and 3 when some batch rows failed.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("No command given.")
        if args.config:
            config = read_config(args.config)
            _apply_config(parser.subcommands[args.command], config)
            args = parser.parse_args(argv)
    except UsageError as e:
        print(f"qsat: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"qsat: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    os.makedirs(args.out_dir, exist_ok=True)
    parameters = {k: v for k, v in vars(args).items() if k != "command"}
    manifest = ExperimentManifest(args.command, parameters, args.seed)
    if args.config:
        manifest.add_input(args.config)

    try:
        with _Stage(manifest, "total", not args.no_timings):
            code = COMMANDS[args.command](args, manifest)
    except UsageError as e:
        print(f"qsat: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (AssertionError, ValueError, RuntimeError, OSError) as e:
        print(f"qsat: {args.command} failed: {type(e).__name__}: {e}",
              file=sys.stderr)
        return EXIT_RUNTIME

    manifest.write(args.out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
