from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import os
import json
import hashlib
import warnings
from dataclasses import dataclass
from multiprocessing import Pool, cpu_count

import numpy as np
import polars as pl
import pyarrow.parquet as pq
from tqdm import tqdm

from qsat.enums import TABLE_FORMATS, DTYPE_MAP


@dataclass(frozen=True)
class RngSpec:
    """
    Reproducible random stream. A master seed plus a stream id select an
    independent generator; further integer keys split it deterministically.

    Parameters:
    ----------
    seed: int
        Master seed (64-bit).
    stream: int
        Stream id, usually the sample or job index.
    """
    seed: int = 0
    stream: int = 0

    def generator(self, *keys: int) -> np.random.Generator:
        """Returns a fresh generator for this stream and optional sub-keys."""
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream,) + tuple(keys)
        )
        return np.random.Generator(np.random.PCG64(sequence))

    def child(self, stream: int) -> "RngSpec":
        """Same master seed, another stream."""
        return RngSpec(self.seed, stream)

    def to_dict(self) -> Dict[str, int]:
        return {"seed": int(self.seed), "stream": int(self.stream)}


def as_generator(rng) -> np.random.Generator:
    """
    Accepts an RngSpec, a numpy Generator or an integer seed and returns a
    numpy Generator.
    """
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return RngSpec().generator()
    return RngSpec(int(rng)).generator()


@dataclass
class JobResult:
    """Outcome of one batch job: either a value or the error it raised."""
    index: int
    value: Any = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_jobs(
        func: Callable,
        jobs: Sequence[tuple],
        n_jobs: int = -1,
        desc: str = None,
        progress: bool = True,
    ) -> List[JobResult]:
    """
    Runs func(*job) for every job, in a process pool when n_jobs != 1. A job
    that raises is recorded as failed and the batch continues. Results are
    returned in job order, independent of completion order.

    Parameters:
    ----------
    func: Callable
        Top-level (picklable) function.
    jobs: Sequence[tuple]
        Positional arguments per job.
    n_jobs: int
        Number of worker processes. -1 uses all CPUs, 1 runs inline.
    desc: str
        Label of the progress bar.
    progress: bool
        Show a tqdm progress bar.

    Returns:
    -------
    results: List[JobResult]
        One entry per job.
    """
    results = [JobResult(i) for i in range(len(jobs))]
    if not jobs:
        return results

    pbar = tqdm(total=len(jobs), desc=desc, disable=not progress)
    n_jobs = min(cpu_count(), len(jobs)) if n_jobs == -1 else n_jobs

    # Inline execution keeps tracebacks readable and avoids pickling
    if n_jobs == 1:
        for i, job in enumerate(jobs):
            try:
                results[i].value = func(*job)
            except Exception as e:
                results[i].error = f"{type(e).__name__}: {e}"
                warnings.warn(
                    f"Job {i} failed: {results[i].error}", RuntimeWarning
                )
            pbar.update(1)
        pbar.close()
        return results

    def on_success(i):
        def callback(value):
            results[i].value = value
            pbar.update(1)
        return callback

    def on_error(i):
        def callback(e):
            results[i].error = f"{type(e).__name__}: {e}"
            warnings.warn(f"Job {i} failed: {results[i].error}", RuntimeWarning)
            pbar.update(1)
        return callback

    pool = Pool(n_jobs, maxtasksperchild=1)
    for i, job in enumerate(jobs):
        pool.apply_async(
            func, args=job, callback=on_success(i), error_callback=on_error(i)
        )
    pool.close()
    pool.join()
    pbar.close()

    return results


def rows_to_frame(rows: List[dict], columns: List[str]) -> pl.DataFrame:
    """
    Builds a DataFrame with the given column order and the dtypes declared in
    enums.DTYPE_MAP.
    """
    polars_types = {int: pl.Int64, float: pl.Float64, str: pl.String,
                    bool: pl.Boolean}
    schema = {c: polars_types[DTYPE_MAP.get(c, float)] for c in columns}
    data = {c: [row.get(c) for row in rows] for c in columns}
    return pl.DataFrame(data, schema=schema)


def write_table(df: pl.DataFrame, path: str) -> str:
    """
    Writes a result table. The format (csv, parquet) follows the extension.

    Parameters:
    ----------
    df: pl.DataFrame
        Table to write.
    path: str
        Output path ending in .csv or .parquet.

    Returns:
    -------
    path: str
        The written path.
    """
    storage_format = path.split(".")[-1].lower()
    assert storage_format in TABLE_FORMATS, \
        f"Invalid table format {storage_format}. Choose from csv, parquet."

    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)

    if storage_format == "csv":
        df.write_csv(path)
    else:
        pq.write_table(df.to_arrow(), path, compression="zstd")
    return path


def load_table(path: str) -> pl.DataFrame:
    """
    Loads a result table from either a csv or a parquet file.

    Parameters:
    ----------
    path: str
        Path to the file.

    Returns:
    -------
    df: pl.DataFrame
        Table contained in the file.
    """
    file_ext = path.split(".")[-1].lower()
    if file_ext == "parquet":
        df = pl.read_parquet(path)
    elif file_ext == "csv":
        # Covering counts may exceed 64 bits
        header = pl.read_csv(path, n_rows=0).columns
        overrides = {"count": pl.String} if "count" in header else None
        df = pl.read_csv(path, schema_overrides=overrides)
    else:
        raise ValueError(f"Invalid file format {file_ext}.")
    return df


def concatenate_tables(paths: List[str], output_file: str) -> str:
    """
    Concatenates result tables part by part into one file. The output format
    follows the extension of output_file. A failed write removes the partial
    output.

    Parameters:
    ----------
    paths: List[str]
        Part files (csv or parquet), concatenated in order.
    output_file: str
        Output path.

    Returns:
    -------
    output_file: str
    """
    assert paths, "No tables to concatenate."
    assert all(os.path.exists(p) for p in paths), "File does not exist."
    storage_format = output_file.split(".")[-1].lower()
    assert storage_format in TABLE_FORMATS, \
        "Invalid output format. Choose from csv, parquet."
    try:
        with open(output_file, mode="wb") as f:
            if storage_format == "csv":
                for i, path in enumerate(paths):
                    load_table(path).write_csv(f, include_header=i == 0)
            else:
                table = load_table(paths[0]).to_arrow()
                writer = pq.ParquetWriter(f, table.schema, compression="zstd")
                writer.write_table(table)
                for path in paths[1:]:
                    writer.write_table(load_table(path).to_arrow())
                writer.close()
    except Exception as e:
        warnings.warn(f"Error: {e}. Removing {output_file}.", RuntimeWarning)
        os.remove(output_file)
        raise
    return output_file


def write_json(obj: Any, path: str) -> str:
    """Writes a JSON document, creating the parent folder if needed."""
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=1)
    return path


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def file_digest(path: str) -> str:
    """
    SHA-256 digest of a file's bytes.

    Parameters:
    ----------
    path: str
        Path to the file.

    Returns:
    -------
    digest: str
        Hex digest.
    """
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            buffer = f.read(1024 * 1024)
            if not buffer:
                break
            sha.update(buffer)
    return sha.hexdigest()


def binomial_error(successes: int, trials: int) -> Tuple[float, float]:
    """Returns (p, standard error) of a binomial proportion."""
    if trials == 0:
        return float("nan"), float("nan")
    p = successes / trials
    return p, float(np.sqrt(p * (1.0 - p) / trials))


if __name__ == "__main__":
    pass
